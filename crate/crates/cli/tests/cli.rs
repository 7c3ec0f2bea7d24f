use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
  "name": "cli-smoke",
  "target": {"name": "gl1d", "d": 3, "beta": 3.0, "delta": 0.5, "h_grid": 1.0},
  "mcmc": {"proposal_std": [0.5], "burn_in": 200},
  "N": 200, "M": 5, "l": 10,
  "flow": {"D": 4},
  "train": {"epochs": 1, "N_batch": 100},
  "seed": 3
}"#;

fn ttflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttflow")).args(args).current_dir(dir).env("RUST_LOG", "warn").output().unwrap()
}

fn manifest_line(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap().trim().to_string()
}

#[test]
fn full_command_sequence_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();

    let gen = ttflow(d, &["generate", "--config", "cfg.json"]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(manifest_line(&gen).ends_with("manifest_generate.json"));
    let run = d.join("runs/cli-smoke");
    assert!(run.join("train.csv").exists() && run.join("test.csv").exists());

    let build = ttflow(d, &["build-tt", "--config", "cfg.json", "--samples", "runs/cli-smoke/train.csv"]);
    assert_eq!(build.status.code(), Some(0), "{}", String::from_utf8_lossy(&build.stderr));
    assert!(run.join("tt.json").exists());

    for (base, sub) in [("runs/cli-smoke/tt.json", "tf"), ("gaussian", "nf")] {
        let out = format!("runs/{sub}");
        let train = ttflow(
            d,
            &[
                "train",
                "--config",
                "cfg.json",
                "--samples",
                "runs/cli-smoke/train.csv",
                "--test",
                "runs/cli-smoke/test.csv",
                "--base",
                base,
                "--out",
                &out,
            ],
        );
        assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
        assert!(d.join(&out).join("checkpoint.json").exists());
    }

    let report =
        ttflow(d, &["report", "runs/tf/manifest_train.json", "runs/nf/manifest_train.json", "--out", "runs/report"]);
    assert_eq!(report.status.code(), Some(0), "{}", String::from_utf8_lossy(&report.stderr));
    assert!(d.join("runs/report/losses.csv").exists());
}

#[test]
fn seed_override_changes_the_samples() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    assert_eq!(ttflow(d, &["generate", "--config", "cfg.json", "--out", "a"]).status.code(), Some(0));
    assert_eq!(ttflow(d, &["generate", "--config", "cfg.json", "--out", "b", "--seed", "4"]).status.code(), Some(0));
    assert_ne!(std::fs::read(d.join("a/train.csv")).unwrap(), std::fs::read(d.join("b/train.csv")).unwrap());
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), CONFIG.replace("\"seed\": 3", "\"seed\": 3, \"colour\": 1")).unwrap();
    let out = ttflow(d, &["generate", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert_eq!(ttflow(d, &["generate", "--config", "missing.json"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    let out = ttflow(d, &["report", "nowhere.json", "--out", "r"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let cfg = ttflow::experiment::ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap();
            count += 1;
        }
    }
    assert!(count >= 4);
}
