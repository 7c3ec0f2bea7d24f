use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::net::{PotentialNet, ACTIVATIONS};
use super::ode::{FlowConfig, FlowModel};
use crate::error::{Error, Result};
use crate::json::{read_json, unwrap, wrap, write_json, F17};
use crate::tt::{read_tt_json, BaseDensity, TtFile};

const FORMAT_VERSION: u32 = 1;
pub const GAUSSIAN_BASE: &str = "gaussian";

/// Versioned checkpoint. Matrices are stored flat in row-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointDocument {
    pub format_version: u32,
    pub d: usize,
    #[serde(rename = "D")]
    pub width: usize,
    pub activations: Vec<String>,
    #[serde(rename = "W1")]
    pub w1: Vec<F17>,
    pub b1: Vec<F17>,
    #[serde(rename = "W2")]
    pub w2: Vec<F17>,
    pub b2: Vec<F17>,
    pub w3: Vec<F17>,
    pub b3: F17,
    pub flow: FlowConfig,
    pub base: String,
}

impl CheckpointDocument {
    pub fn new(net: &PotentialNet, flow: FlowConfig, base: impl Into<String>) -> Self {
        let flat = |v: ndarray::ArrayView2<'_, f64>| v.iter().copied().map(F17).collect::<Vec<_>>();
        Self {
            format_version: FORMAT_VERSION,
            d: net.dim(),
            width: net.width(),
            activations: ACTIVATIONS.iter().map(|s| s.to_string()).collect(),
            w1: flat(net.w1()),
            b1: wrap(&net.b1().to_vec()),
            w2: flat(net.w2()),
            b2: wrap(&net.b2().to_vec()),
            w3: wrap(&net.w3().to_vec()),
            b3: F17(net.b3()),
            flow,
            base: base.into(),
        }
    }

    pub fn net(&self) -> Result<PotentialNet> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {}", self.format_version)));
        }
        if self.activations != ACTIVATIONS {
            return Err(Error::Format(format!("unsupported activations {:?}", self.activations)));
        }
        let (d, w) = (self.d, self.width);
        let expect = [
            (self.w1.len(), w * d),
            (self.b1.len(), w),
            (self.w2.len(), w * w),
            (self.b2.len(), w),
            (self.w3.len(), w),
        ];
        if expect.iter().any(|(got, want)| got != want) {
            return Err(Error::Format(format!("weight array sizes do not match d = {d}, D = {w}")));
        }
        let mut theta = Vec::with_capacity(w * d + 2 * w + w * w + w + 1);
        for part in [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3] {
            theta.extend(unwrap(part));
        }
        theta.push(self.b3.0);
        PotentialNet::from_theta(d, w, theta)
    }
}

pub fn write_checkpoint(path: &Path, net: &PotentialNet, flow: FlowConfig, base: &str) -> Result<()> {
    write_json(path, &CheckpointDocument::new(net, flow, base))
}

/// Resolves `base` relative to the checkpoint's directory.
pub fn base_path(checkpoint: &Path, base: &str) -> Option<PathBuf> {
    if base == GAUSSIAN_BASE {
        return None;
    }
    let p = Path::new(base);
    Some(if p.is_absolute() { p.to_path_buf() } else { checkpoint.parent().unwrap_or(Path::new(".")).join(p) })
}

pub fn load_base(path: Option<&Path>, dim: usize) -> Result<BaseDensity> {
    let base = match path {
        None => BaseDensity::Gaussian { dim },
        Some(p) => match read_tt_json(p)? {
            TtFile::Tt(tt) => BaseDensity::Clipped(tt),
            TtFile::Squared(sq) => BaseDensity::Squared(sq),
        },
    };
    if base.dim() != dim {
        return Err(Error::Configuration(format!("base has dimension {}, flow has {dim}", base.dim())));
    }
    Ok(base)
}

pub fn read_checkpoint(path: &Path) -> Result<FlowModel> {
    let doc: CheckpointDocument = read_json(path)?;
    doc.flow.validate()?;
    let net = doc.net()?;
    let base = load_base(base_path(path, &doc.base).as_deref(), doc.d)?;
    FlowModel::new(net, doc.flow, base)
}
