use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ttflow::experiment::{cmd_build_tt, cmd_generate, cmd_report, cmd_train, ExperimentConfig};
use ttflow::Error;

/// Tensor-train density estimation refined by a potential flow.
#[derive(Parser, Debug)]
#[command(name = "ttflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configured `out_dir` or `runs/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw train and test samples from the configured target.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Build the TT density from a sample file.
    BuildTt {
        #[command(flatten)]
        common: Common,
        /// Training samples (CSV).
        #[arg(long)]
        samples: PathBuf,
    },
    /// Train the flow on a TT base file or on `gaussian`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        base: String,
    },
    /// Merge loss curves and draw scatter plots for finished training runs.
    Report {
        /// Training manifests.
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<PathBuf, Error> {
    match cli.command {
        Command::Generate { common } => {
            let (cfg, out) = load(&common)?;
            Ok(cmd_generate(&cfg, &out)?.manifest_path)
        }
        Command::BuildTt { common, samples } => {
            let (cfg, out) = load(&common)?;
            Ok(cmd_build_tt(&cfg, &samples, &out)?.manifest_path)
        }
        Command::Train { common, samples, test, base } => {
            let (cfg, out) = load(&common)?;
            Ok(cmd_train(&cfg, &samples, &test, &base, &out)?.manifest_path)
        }
        Command::Report { manifests, out } => Ok(cmd_report(&manifests, &out)?.manifest_path),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
