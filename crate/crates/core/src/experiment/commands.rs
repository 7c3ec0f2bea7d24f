use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{BaseMode, ExperimentConfig};
use super::manifest::RunManifest;
use super::svg::{scatter_svg, Panel};
use crate::error::{Error, Result};
use crate::flow::{
    load_base, push_rows, read_checkpoint, train, write_checkpoint, FlowModel, LossRecord, PotentialNet, GAUSSIAN_BASE,
};
use crate::json::write_json;
use crate::pipeline::{estimate_tt, negative_mass_fraction, BuildDiagnostics};
use crate::samples::{format_f17, write_matrix_csv, SampleSet};
use crate::targets::{mcmc_sample, write_sidecar, SampleSidecar};
use crate::tt::{born_fit, write_tt_json, BaseDensity, TtFile};

const PROBE_POINTS: usize = 100_000;

pub struct GenerateOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
}

/// Draws `N + N_test` states from one interleaved MCMC stream and splits them into
/// disjoint train and test files.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<GenerateOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let target = cfg.target.build()?;
    let mcmc = cfg.mcmc_config();
    let n = cfg.n;
    let (all, report) = mcmc_sample(&target, n + cfg.n_test(), &mcmc).map_err(|e| e.in_stage("targets"))?;
    let train = out.join("train.csv");
    let test = out.join("test.csv");
    write_matrix_csv(&train, all.data().slice(s![..n, ..]))?;
    write_matrix_csv(&test, all.data().slice(s![n.., ..]))?;
    let iv = target.interval();
    write_sidecar(
        &out.join("samples.json"),
        &SampleSidecar {
            target: cfg.target.clone(),
            interval: [iv.lower(), iv.upper()],
            rows: all.len(),
            mcmc,
            report: report.clone(),
        },
    )?;
    let mut manifest = RunManifest::new("generate", cfg.name.clone(), cfg);
    manifest.add_artifact("train", out, "train.csv")?;
    manifest.add_artifact("test", out, "test.csv")?;
    manifest.add_artifact("sidecar", out, "samples.json")?;
    manifest.metrics.insert("mcmc_acceptance".into(), report.acceptance);
    manifest.seconds = start.elapsed().as_secs_f64();
    let manifest_path = out.join("manifest_generate.json");
    manifest.write(&manifest_path)?;
    Ok(GenerateOutcome { manifest, manifest_path, train, test })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TtDiagnostics {
    pub kind: String,
    pub integral: f64,
    pub negative_mass_fraction: f64,
    pub build: BuildDiagnostics,
    #[serde(default)]
    pub born_objective: Option<f64>,
    #[serde(default)]
    pub born_trace: Option<Vec<f64>>,
}

pub struct BuildOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub tt_path: PathBuf,
    pub tt: TtFile,
    pub diagnostics: TtDiagnostics,
}

/// Marginal estimation, core equations and normalization; in born mode the result is
/// then fitted by a squared TT.
pub fn cmd_build_tt(cfg: &ExperimentConfig, samples: &Path, out: &Path) -> Result<BuildOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let set = read_samples(cfg, samples)?;
    let (tt, build) = estimate_tt(&set, &cfg.tt_build_config())?;
    let mut probe_rng = ChaCha8Rng::seed_from_u64(cfg.seeds().sample);
    let negative = negative_mass_fraction(&tt, &mut probe_rng, PROBE_POINTS);
    let integral = tt.integral();
    let (file, born_objective, born_trace) = if cfg.base == BaseMode::Born {
        let fit = born_fit(&tt, &cfg.born_config()).map_err(|e| e.in_stage("tt-density"))?;
        (TtFile::Squared(fit.squared), Some(fit.objective), Some(fit.trace))
    } else {
        (TtFile::Tt(tt), None, None)
    };
    let diagnostics = TtDiagnostics {
        kind: file.to_document().kind,
        integral,
        negative_mass_fraction: negative,
        build,
        born_objective,
        born_trace,
    };
    let tt_path = out.join("tt.json");
    write_tt_json(&tt_path, &file)?;
    write_json(&out.join("tt_diagnostics.json"), &diagnostics)?;
    let mut manifest = RunManifest::new("build-tt", cfg.name.clone(), cfg);
    manifest.add_input("samples", samples)?;
    manifest.add_artifact("tt", out, "tt.json")?;
    manifest.add_artifact("diagnostics", out, "tt_diagnostics.json")?;
    manifest.metrics.insert("integral".into(), integral);
    manifest.metrics.insert("negative_mass_fraction".into(), negative);
    manifest.seconds = start.elapsed().as_secs_f64();
    let manifest_path = out.join("manifest_build_tt.json");
    manifest.write(&manifest_path)?;
    Ok(BuildOutcome { manifest, manifest_path, tt_path, tt: file, diagnostics })
}

pub struct TrainOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub model: FlowModel,
    pub record: LossRecord,
    /// NLL of the base density alone on the test set.
    pub base_test_nll: f64,
}

/// Trains the flow on `base`, which is a TT file or the literal `gaussian`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    train_csv: &Path,
    test_csv: &Path,
    base: &str,
    out: &Path,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let d = cfg.dim();
    let train_set = read_samples(cfg, train_csv)?;
    let test_set = read_samples(cfg, test_csv)?;
    let (base_ref, base_path) = if base == GAUSSIAN_BASE {
        (GAUSSIAN_BASE.to_string(), None)
    } else {
        let abs = std::path::absolute(base)?;
        (abs.display().to_string(), Some(abs))
    };
    let base_density = load_base(base_path.as_deref(), d)?;
    let base_test_nll = base_nll(&base_density, test_set.data());
    let net = PotentialNet::identity(d, cfg.flow.width, cfg.seeds().init)?;
    let model = FlowModel::new(net, cfg.flow_config(), base_density)?;
    let (model, record) = train(model, train_set.data(), test_set.data(), &cfg.train_config())?;

    write_checkpoint(&out.join("checkpoint.json"), &model.net, model.config, &base_ref)?;
    record.write_csv(&out.join("loss.csv"))?;
    let label = if base_path.is_some() { "tf" } else { "nf" };
    let mut manifest = RunManifest::new("train", format!("{}-{label}", cfg.name), cfg);
    manifest.base = Some(base_ref);
    manifest.add_input("train", train_csv)?;
    manifest.add_input("test", test_csv)?;
    if let Some(p) = &base_path {
        manifest.add_input("base", p)?;
    }
    manifest.add_artifact("checkpoint", out, "checkpoint.json")?;
    manifest.add_artifact("loss", out, "loss.csv")?;
    manifest.metrics.insert("base_test_nll".into(), base_test_nll);
    manifest.metrics.insert("initial_test_nll".into(), record.initial_test_nll);
    manifest.metrics.insert("final_test_nll".into(), record.final_test_nll());
    if let Some(v) = record.train_nll.last() {
        manifest.metrics.insert("final_train_nll".into(), *v);
    }
    manifest.seconds = start.elapsed().as_secs_f64();
    let manifest_path = out.join("manifest_train.json");
    manifest.write(&manifest_path)?;
    Ok(TrainOutcome { manifest, manifest_path, model, record, base_test_nll })
}

/// Reruns a training manifest into `out` from its recorded config and inputs.
pub fn rerun_train(manifest_path: &Path, out: &Path) -> Result<TrainOutcome> {
    let m = RunManifest::read(manifest_path)?;
    if m.command != "train" {
        return Err(Error::Report {
            manifest: manifest_path.display().to_string(),
            message: "not a train manifest".into(),
        });
    }
    let train_csv = m.input_path(manifest_path, "train")?;
    let test_csv = m.input_path(manifest_path, "test")?;
    let base = m.base.clone().unwrap_or_else(|| GAUSSIAN_BASE.to_string());
    cmd_train(&m.config, &train_csv, &test_csv, &base, out)
}

pub fn base_nll(base: &BaseDensity, rows: ArrayView2<'_, f64>) -> f64 {
    -rows.axis_iter(Axis(0)).map(|r| base.log_density(&r.to_vec())).sum::<f64>() / rows.nrows() as f64
}

fn read_samples(cfg: &ExperimentConfig, path: &Path) -> Result<SampleSet> {
    let target = cfg.target.build()?;
    let set = SampleSet::read_csv(path, target.interval())?;
    if set.dim() != cfg.dim() {
        return Err(Error::Validation(vec![format!(
            "{}: has {} columns but target.d is {}",
            path.display(),
            set.dim(),
            cfg.dim()
        )]));
    }
    Ok(set)
}

pub struct ReportOutcome {
    pub losses: PathBuf,
    pub figures: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

/// Joins the loss curves of training runs and draws data / base / flow scatter plots.
pub fn cmd_report(manifests: &[PathBuf], out: &Path) -> Result<ReportOutcome> {
    if manifests.is_empty() {
        return Err(Error::Argument("report needs at least one manifest".into()));
    }
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let mut runs = Vec::new();
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for path in manifests {
        let m = RunManifest::read(path)?;
        if m.command != "train" {
            return Err(Error::Report {
                manifest: path.display().to_string(),
                message: format!("expected a train manifest, found {:?}", m.command),
            });
        }
        let count = used.entry(m.run.clone()).or_insert(0);
        *count += 1;
        let label = if *count == 1 { m.run.clone() } else { format!("{}-{}", m.run, count) };
        let loss = LossRecord::read_csv(&m.artifact_path(path, "loss")?)?;
        runs.push((path.clone(), m, label, loss));
    }

    let losses = out.join("losses.csv");
    let mut w = csv::Writer::from_path(&losses)?;
    let mut header = vec!["epoch".to_string()];
    for (_, _, label, _) in &runs {
        header.push(format!("{label}_train"));
        header.push(format!("{label}_test"));
    }
    w.write_record(&header)?;
    let epochs = runs.iter().map(|r| r.3.epochs()).max().unwrap_or(0);
    for e in 0..epochs {
        let mut row = vec![(e + 1).to_string()];
        for (_, _, _, loss) in &runs {
            row.push(loss.train_nll.get(e).map(|v| format_f17(*v)).unwrap_or_default());
            row.push(loss.test_nll.get(e).map(|v| format_f17(*v)).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut report = RunManifest::new("report", "report".into(), &runs[0].1.config);
    report.add_artifact("losses", out, "losses.csv")?;
    let mut figures = Vec::new();
    for (path, m, label, _) in &runs {
        let file = format!("scatter_{label}.svg");
        let svg = scatter_for_run(path, m, label).map_err(|e| match e {
            Error::Report { .. } => e,
            other => Error::Report { manifest: path.display().to_string(), message: other.to_string() },
        })?;
        std::fs::write(out.join(&file), svg)?;
        report.add_input(label, path)?;
        report.add_artifact(&format!("scatter_{label}"), out, &file)?;
        figures.push(out.join(file));
    }
    report.seconds = start.elapsed().as_secs_f64();
    let manifest_path = out.join("manifest_report.json");
    report.write(&manifest_path)?;
    Ok(ReportOutcome { losses, figures, manifest_path })
}

fn scatter_for_run(path: &Path, m: &RunManifest, label: &str) -> Result<String> {
    let cfg = &m.config;
    let n = cfg.report.points;
    let [a, b] = cfg.coords();
    let data = read_samples(cfg, &m.input_path(path, "train")?)?;
    let model = read_checkpoint(&m.artifact_path(path, "checkpoint")?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds().sample);
    let sampler = model.base.sampler()?;
    let mut base_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut flow_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while flow_rows.len() < n {
        let (x0, _) = sampler.sample(&mut rng, n - flow_rows.len());
        let (y, _) = push_rows(&model.net, &model.config, x0.view());
        if y.nrows() == 0 {
            return Err(Error::Report {
                manifest: path.display().to_string(),
                message: "every flow trajectory diverged".into(),
            });
        }
        for r in 0..y.nrows() {
            flow_rows.push(y.row(r).to_vec());
        }
        base_rows.extend(x0.rows().into_iter().take(y.nrows()).map(|r| r.to_vec()));
    }
    let project = |rows: &mut dyn Iterator<Item = Vec<f64>>| rows.map(|r| (r[a - 1], r[b - 1])).collect::<Vec<_>>();
    let data_rows: Array2<f64> = data.data().slice(s![..n.min(data.len()), ..]).to_owned();
    let iv = data.interval();
    let panel = |title: String, points| Panel {
        title,
        x_label: format!("x{a}"),
        y_label: format!("x{b}"),
        range: (iv.lower(), iv.upper()),
        points,
    };
    let base_title = if m.base.as_deref() == Some(GAUSSIAN_BASE) { "base (gaussian)" } else { "base (tt)" };
    Ok(scatter_svg(&[
        panel("given samples".into(), project(&mut data_rows.rows().into_iter().map(|r| r.to_vec()))),
        panel(base_title.into(), project(&mut base_rows.into_iter())),
        panel(format!("flow samples ({label})"), project(&mut flow_rows.into_iter())),
    ]))
}
