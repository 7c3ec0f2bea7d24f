use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cde::RankSelection;
use crate::error::{Error, Result};
use crate::flow::{FlowConfig, TrainConfig};
use crate::pipeline::{RankPlan, TtBuildConfig};
use crate::targets::{McmcConfig, TargetSpec};
use crate::tt::BornConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaseMode {
    #[default]
    Clip,
    Born,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSettings {
    pub proposal_std: Vec<f64>,
    #[serde(default = "d_burn_in")]
    pub burn_in: usize,
    #[serde(default = "d_thinning")]
    pub thinning: usize,
    #[serde(default = "d_chains")]
    pub chains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BornSettings {
    #[serde(default)]
    pub ranks: Option<Vec<usize>>,
    #[serde(default = "d_born_steps")]
    pub steps: usize,
    #[serde(default = "d_born_noise")]
    pub noise: f64,
}

impl Default for BornSettings {
    fn default() -> Self {
        Self { ranks: None, steps: d_born_steps(), noise: d_born_noise() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSettings {
    #[serde(rename = "T", default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(rename = "D", default = "d_width")]
    pub width: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { horizon: d_horizon(), tau: d_tau(), width: d_width() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    /// Defaults to 100 epochs for `N <= 10^3`, 30 for `N >= 10^5`, 50 otherwise.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(rename = "N_batch", default = "d_batch")]
    pub batch_size: usize,
    #[serde(rename = "LR", default = "d_lr")]
    pub lr: f64,
    #[serde(rename = "WD", default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { epochs: None, batch_size: d_batch(), lr: d_lr(), weight_decay: d_wd(), gamma: d_gamma() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSettings {
    /// 1-based projection coordinates; defaults to `(d-1, d)`.
    #[serde(default)]
    pub coords: Option<[usize; 2]>,
    #[serde(default = "d_points")]
    pub points: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { coords: None, points: d_points() }
    }
}

/// One experiment. Unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_version")]
    pub format_version: u32,
    pub name: String,
    pub target: TargetSpec,
    pub mcmc: McmcSettings,
    #[serde(rename = "N", default = "d_n")]
    pub n: usize,
    /// Test-set size; defaults to `N / 2`.
    #[serde(rename = "N_test", default)]
    pub n_test: Option<usize>,
    #[serde(rename = "M", default = "d_m")]
    pub m: usize,
    #[serde(default = "d_l")]
    pub l: usize,
    #[serde(default)]
    pub ranks: RankPlan,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub base: BaseMode,
    #[serde(default)]
    pub born: BornSettings,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub report: ReportSettings,
}

fn d_version() -> u32 {
    CONFIG_VERSION
}
fn d_burn_in() -> usize {
    10_000
}
fn d_thinning() -> usize {
    10
}
fn d_chains() -> usize {
    8
}
fn d_born_steps() -> usize {
    200
}
fn d_born_noise() -> f64 {
    1e-2
}
fn d_horizon() -> f64 {
    0.2
}
fn d_tau() -> f64 {
    0.01
}
fn d_width() -> usize {
    128
}
fn d_batch() -> usize {
    5_000
}
fn d_lr() -> f64 {
    5e-3
}
fn d_wd() -> f64 {
    1e-3
}
fn d_gamma() -> f64 {
    0.9
}
fn d_points() -> usize {
    1_000
}
fn d_n() -> usize {
    10_000
}
fn d_m() -> usize {
    25
}
fn d_l() -> usize {
    20
}

const TOP_KEYS: &[&str] = &[
    "format_version",
    "name",
    "target",
    "mcmc",
    "N",
    "N_test",
    "M",
    "l",
    "ranks",
    "bandwidth",
    "base",
    "born",
    "flow",
    "train",
    "seed",
    "out_dir",
    "report",
];
const NESTED_KEYS: &[(&str, &[&str])] = &[
    ("mcmc", &["proposal_std", "burn_in", "thinning", "chains"]),
    ("born", &["ranks", "steps", "noise"]),
    ("flow", &["T", "tau", "D"]),
    ("train", &["epochs", "N_batch", "LR", "WD", "gamma"]),
    ("report", &["coords", "points"]),
    ("target", &["name", "d", "c", "beta", "delta", "h_grid"]),
];

/// Seeds of the individual stages, all derived from the configured seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub data: u64,
    pub born: u64,
    pub init: u64,
    pub train: u64,
    pub sample: u64,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let unknown = unknown_keys(&value);
        if !unknown.is_empty() {
            return Err(Error::Validation(unknown.into_iter().map(|k| format!("{k}: unknown key")).collect()));
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| Error::Validation(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Validation(vec![format!("{}: {e}", path.display())]))?;
        Self::from_json_str(&text)
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn n_test(&self) -> usize {
        self.n_test.unwrap_or(self.n / 2)
    }

    pub fn epochs(&self) -> usize {
        self.train.epochs.unwrap_or(if self.n <= 1_000 {
            100
        } else if self.n >= 100_000 {
            30
        } else {
            50
        })
    }

    pub fn seeds(&self) -> StageSeeds {
        let s = self.seed;
        StageSeeds {
            data: s,
            born: s.wrapping_add(1),
            init: s.wrapping_add(2),
            train: s.wrapping_add(3),
            sample: s.wrapping_add(4),
        }
    }

    pub fn coords(&self) -> [usize; 2] {
        let d = self.dim();
        self.report.coords.unwrap_or([d - 1, d])
    }

    /// Semantic checks; every offending key is listed.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.format_version != CONFIG_VERSION {
            bad.push(format!("format_version: expected {CONFIG_VERSION}, got {}", self.format_version));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bad.push("name: must be a non-empty file-name-safe string".to_string());
        }
        if let Err(e) = self.target.validate() {
            bad.extend(e);
        }
        let d = self.dim();
        if let Err(e) = self.mcmc_config().validate(d) {
            bad.extend(e);
        }
        if d < 2 {
            bad.push("target.d: the TT pipeline needs d >= 2".to_string());
        }
        if self.n < 2 {
            bad.push("N: need at least 2 training samples".to_string());
        }
        if self.n_test() == 0 {
            bad.push("N_test: must be positive".to_string());
        }
        if self.m == 0 {
            bad.push("M: must be positive".to_string());
        }
        if self.l == 0 {
            bad.push("l: must be positive".to_string());
        }
        match &self.ranks {
            RankPlan::PerBond(r) => {
                if d >= 2 && r.len() != d - 1 {
                    bad.push(format!("ranks: expected {} entries, got {}", d.saturating_sub(1), r.len()));
                }
                if r.contains(&0) {
                    bad.push("ranks: entries must be positive".to_string());
                }
            }
            RankPlan::Uniform(RankSelection::Fixed(0)) => bad.push("ranks: must be positive".to_string()),
            RankPlan::Uniform(RankSelection::Threshold(t)) if !(*t >= 0.0 && *t < 1.0) => {
                bad.push("ranks: threshold must be in [0, 1)".to_string())
            }
            _ => {}
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                bad.push("bandwidth: must be positive".to_string());
            }
        }
        if let Some(r) = &self.born.ranks {
            if d >= 2 && r.len() != d - 1 {
                bad.push(format!("born.ranks: expected {} entries, got {}", d - 1, r.len()));
            }
        }
        if FlowConfig::new(self.flow.horizon, self.flow.tau).is_err() {
            bad.push("flow.T/flow.tau: need 0 < tau <= T".to_string());
        }
        if self.flow.width == 0 {
            bad.push("flow.D: must be positive".to_string());
        }
        if self.train.batch_size == 0 || self.train.batch_size > self.n {
            bad.push(format!("train.N_batch: must be in 1..={}", self.n));
        }
        if self.train.lr.is_nan() || self.train.lr < 0.0 {
            bad.push("train.LR: must be non-negative".to_string());
        }
        if self.train.weight_decay.is_nan() || self.train.weight_decay < 0.0 {
            bad.push("train.WD: must be non-negative".to_string());
        }
        if !(self.train.gamma > 0.0 && self.train.gamma <= 1.0) {
            bad.push("train.gamma: must be in (0, 1]".to_string());
        }
        if let Some([a, b]) = self.report.coords {
            if a == 0 || b == 0 || a > d || b > d || a == b {
                bad.push(format!("report.coords: need two distinct coordinates in 1..={d}"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad))
        }
    }

    pub fn mcmc_config(&self) -> McmcConfig {
        McmcConfig {
            proposal_std: self.mcmc.proposal_std.clone(),
            burn_in: self.mcmc.burn_in,
            thinning: self.mcmc.thinning,
            chains: self.mcmc.chains,
            seed: self.seeds().data,
        }
    }

    pub fn tt_build_config(&self) -> TtBuildConfig {
        TtBuildConfig { basis_size: self.m, quadrature: self.l, ranks: self.ranks.clone(), bandwidth: self.bandwidth }
    }

    pub fn born_config(&self) -> BornConfig {
        let d = self.dim();
        let ranks = self.born.ranks.clone().unwrap_or_else(|| match &self.ranks {
            RankPlan::PerBond(r) => r.clone(),
            RankPlan::Uniform(RankSelection::Fixed(r)) => vec![*r; d - 1],
            RankPlan::Uniform(RankSelection::Threshold(_)) => vec![2; d - 1],
        });
        BornConfig { ranks, steps: self.born.steps, seed: self.seeds().born, noise: self.born.noise }
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig { horizon: self.flow.horizon, tau: self.flow.tau }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs(),
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            weight_decay: self.train.weight_decay,
            gamma: self.train.gamma,
            seed: self.seeds().train,
        }
    }
}

fn unknown_keys(value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let Some(top) = value.as_object() else {
        return vec!["<root>: expected a JSON object".to_string()];
    };
    for (k, v) in top {
        if !TOP_KEYS.contains(&k.as_str()) {
            out.push(k.clone());
            continue;
        }
        if let Some((_, allowed)) = NESTED_KEYS.iter().find(|(name, _)| name == k) {
            if let Some(obj) = v.as_object() {
                out.extend(obj.keys().filter(|key| !allowed.contains(&key.as_str())).map(|key| format!("{k}.{key}")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Value {
        serde_json::json!({
            "name": "gl",
            "target": {"name": "gl1d", "d": 4, "beta": 3.0, "delta": 0.5, "h_grid": 1.0},
            "mcmc": {"proposal_std": [0.5]}
        })
    }

    #[test]
    fn defaults_follow_the_hyperparameter_table() {
        let cfg = ExperimentConfig::from_json_str(&minimal().to_string()).unwrap();
        assert_eq!(cfg.n, 10_000);
        assert_eq!(cfg.n_test(), 5_000);
        assert_eq!(cfg.m, 25);
        assert_eq!(cfg.l, 20);
        assert_eq!(cfg.ranks, RankPlan::Uniform(RankSelection::Fixed(2)));
        assert_eq!(cfg.flow_config(), FlowConfig { horizon: 0.2, tau: 0.01 });
        assert_eq!(cfg.flow.width, 128);
        assert_eq!(cfg.train.batch_size, 5_000);
        assert_eq!((cfg.train.lr, cfg.train.weight_decay, cfg.train.gamma), (5e-3, 1e-3, 0.9));
        assert_eq!(cfg.epochs(), 50);
        assert_eq!(cfg.coords(), [3, 4]);
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let mut v = minimal();
        v["lr"] = 1.into();
        v["flow"] = serde_json::json!({"T": 0.2, "steps": 3});
        match ExperimentConfig::from_json_str(&v.to_string()) {
            Err(Error::Validation(keys)) => {
                assert_eq!(keys.len(), 2, "{keys:?}");
                assert!(keys.iter().any(|k| k.starts_with("flow.steps")));
                assert!(keys.iter().any(|k| k.starts_with("lr")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_their_keys() {
        let mut v = minimal();
        v["N"] = 100.into();
        v["ranks"] = serde_json::json!([2, 2]);
        v["flow"] = serde_json::json!({"T": 0.001, "tau": 0.01});
        match ExperimentConfig::from_json_str(&v.to_string()) {
            Err(Error::Validation(keys)) => {
                let joined = keys.join("\n");
                for key in ["ranks", "flow.T", "train.N_batch"] {
                    assert!(joined.contains(key), "{key} missing in {joined}");
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn epoch_defaults_scale_with_sample_size() {
        let mut v = minimal();
        v["N"] = 1000.into();
        v["train"] = serde_json::json!({"N_batch": 1000});
        assert_eq!(ExperimentConfig::from_json_str(&v.to_string()).unwrap().epochs(), 100);
        v["N"] = 100_000.into();
        assert_eq!(ExperimentConfig::from_json_str(&v.to_string()).unwrap().epochs(), 30);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::from_json_str(&minimal().to_string()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap(), cfg);
    }
}
