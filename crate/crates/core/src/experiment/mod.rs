//! Configuration-driven experiment runs: sample generation, TT construction, flow
//! training and reports, each leaving a manifest behind.

mod commands;
mod config;
mod manifest;
mod svg;

pub use commands::{
    base_nll, cmd_build_tt, cmd_generate, cmd_report, cmd_train, rerun_train, BuildOutcome, GenerateOutcome,
    ReportOutcome, TrainOutcome, TtDiagnostics,
};
pub use config::{
    BaseMode, BornSettings, ExperimentConfig, FlowSettings, McmcSettings, ReportSettings, StageSeeds, TrainSettings,
    CONFIG_VERSION,
};
pub use manifest::{sha256_file, FileRecord, RunManifest, MANIFEST_VERSION};
pub use svg::{scatter_svg, Panel, PANEL_SIZE};
