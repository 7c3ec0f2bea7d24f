use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{FunctionalTT, SquaredTT};
use crate::basis::{BasisSpec, Interval};
use crate::error::{Error, Result};
use crate::json::{read_json, write_json, F17};

const FORMAT_VERSION: u32 = 1;

/// On-disk form of a TT. `cores[k][a][i][b]` is entry `(a, i, b)` of core `k + 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtDocument {
    pub format_version: u32,
    pub interval: [F17; 2],
    #[serde(rename = "M")]
    pub m: usize,
    pub d: usize,
    pub ranks: Vec<usize>,
    pub cores: Vec<Vec<Vec<Vec<F17>>>>,
    pub kind: String,
}

/// Either kind of TT density that can live in a file.
#[derive(Debug, Clone, PartialEq)]
pub enum TtFile {
    Tt(FunctionalTT),
    Squared(SquaredTT),
}

impl TtFile {
    pub fn to_document(&self) -> TtDocument {
        let (tt, kind) = match self {
            TtFile::Tt(tt) => (tt, "tt"),
            TtFile::Squared(sq) => (sq.inner(), "squared-tt"),
        };
        let iv = tt.basis().interval();
        let cores = tt
            .cores()
            .iter()
            .map(|c| {
                let (r0, m, r1) = c.dim();
                (0..r0).map(|a| (0..m).map(|i| (0..r1).map(|b| F17(c[[a, i, b]])).collect()).collect()).collect()
            })
            .collect();
        TtDocument {
            format_version: FORMAT_VERSION,
            interval: [F17(iv.lower()), F17(iv.upper())],
            m: tt.basis().size(),
            d: tt.dim(),
            ranks: tt.ranks(),
            cores,
            kind: kind.to_string(),
        }
    }

    pub fn from_document(doc: &TtDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported TT format version {}", doc.format_version)));
        }
        let iv = Interval::new(doc.interval[0].0, doc.interval[1].0)?;
        let basis = BasisSpec::new(doc.m, iv)?;
        if doc.cores.len() != doc.d {
            return Err(Error::Format(format!("d = {} but {} cores", doc.d, doc.cores.len())));
        }
        let mut cores = Vec::with_capacity(doc.d);
        for (k, nested) in doc.cores.iter().enumerate() {
            let r0 = nested.len();
            let m = nested.first().map_or(0, |v| v.len());
            let r1 = nested.first().and_then(|v| v.first()).map_or(0, |v| v.len());
            let mut flat = Vec::with_capacity(r0 * m * r1);
            for slab in nested {
                if slab.len() != m {
                    return Err(Error::Format(format!("core {} is ragged", k + 1)));
                }
                for row in slab {
                    if row.len() != r1 {
                        return Err(Error::Format(format!("core {} is ragged", k + 1)));
                    }
                    flat.extend(row.iter().map(|v| v.0));
                }
            }
            cores.push(Array3::from_shape_vec((r0, m, r1), flat).map_err(|e| Error::Format(e.to_string()))?);
        }
        let tt = FunctionalTT::new(basis, cores)?;
        if tt.ranks() != doc.ranks {
            return Err(Error::Format(format!("declared ranks {:?} disagree with cores {:?}", doc.ranks, tt.ranks())));
        }
        match doc.kind.as_str() {
            "tt" => Ok(TtFile::Tt(tt)),
            "squared-tt" => Ok(TtFile::Squared(SquaredTT::from_normalized(tt))),
            other => Err(Error::Format(format!("unknown TT kind {other:?}"))),
        }
    }
}

pub fn write_tt_json(path: &Path, tt: &TtFile) -> Result<()> {
    write_json(path, &tt.to_document())
}

pub fn read_tt_json(path: &Path) -> Result<TtFile> {
    TtFile::from_document(&read_json(path)?)
}
