//! Sketched core-determining equations.
//!
//! Each projected marginal gives a sketch pair: `B_k` holds the leading left singular
//! vectors of the marginal's coefficient matrix (for `k = d` it is the matrix itself),
//! and `A_k` is `B_k` with its first variable integrated out. The discrete cores then
//! follow from `G_1 = B_1` and the least-squares problems `A_{k-1} G_k = B_k`.

use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSpec, Interval};
use crate::error::{Error, Result};
use crate::linalg;
use crate::marginal::MarginalCoeffs;
use crate::tt::FunctionalTT;

/// How many left singular vectors to keep for each unfolding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSelection {
    Fixed(usize),
    /// Keep singular values with `s_i / s_1` strictly above this ratio.
    Threshold(f64),
}

impl Default for RankSelection {
    fn default() -> Self {
        RankSelection::Fixed(2)
    }
}

#[derive(Debug, Clone)]
pub struct SketchPair {
    pub k: usize,
    /// `M x r_1` for `k = 1`, `M^2 x r_k` for interior `k`, `M x M` for `k = d`.
    pub b: Array2<f64>,
    /// `M x r_k`; absent for `k = d`.
    pub a: Option<Array2<f64>>,
    pub rank: usize,
    pub requested_rank: Option<usize>,
    pub singular_values: Vec<f64>,
}

/// Truncated SVD of one coefficient matrix. `d` is the chain length, needed to tell
/// the last marginal apart from the others.
pub fn sketch_from_coeffs(
    coeffs: &MarginalCoeffs,
    d: usize,
    ranks: RankSelection,
    interval: Interval,
) -> Result<SketchPair> {
    let k = coeffs.k();
    let m = coeffs.basis_size();
    let entries = coeffs.entries();
    if k == d {
        if entries.dim() != (m, m) {
            return Err(Error::Argument(format!("last marginal must be {m}x{m}, got {:?}", entries.dim())));
        }
        return Ok(SketchPair {
            k,
            b: entries.clone(),
            a: None,
            rank: m,
            requested_rank: None,
            singular_values: Vec::new(),
        });
    }
    let expected_rows = if k == 1 { m } else { m * m };
    if entries.dim() != (expected_rows, m) {
        return Err(Error::Argument(format!("marginal {k} must be {expected_rows}x{m}, got {:?}", entries.dim())));
    }

    let dec = linalg::svd(entries.view());
    let sv: Vec<f64> = dec.singular_values.to_vec();
    let numerical = linalg::numerical_rank(&sv, entries.nrows(), entries.ncols()).max(1);
    let (wanted, requested) = match ranks {
        RankSelection::Fixed(r) => {
            if r == 0 || r > expected_rows.min(m) {
                return Err(Error::Argument(format!("rank {r} invalid for a {expected_rows}x{m} unfolding")));
            }
            (r, Some(r))
        }
        RankSelection::Threshold(t) => {
            let top = sv.first().copied().unwrap_or(0.0);
            (sv.iter().filter(|&&s| s > t * top).count().max(1), None)
        }
    };
    let rank = wanted.min(numerical);
    if rank < wanted {
        log::warn!("marginal {k}: requested rank {wanted} exceeds numerical rank {numerical}, using {rank}");
    }
    let b = dec.u.slice(s![.., ..rank]).to_owned();
    let a = if k == 1 {
        b.clone()
    } else {
        // Integrating L_1 over the interval gives sqrt(b - a); all other L_i integrate to 0.
        b.slice(s![..m, ..]).mapv(|v| v * interval.constant_mass())
    };
    Ok(SketchPair { k, b, a: Some(a), rank, requested_rank: requested, singular_values: sv })
}

/// Coefficient tensor `r_{k-1} x M x r_k` of one discrete core.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCore {
    pub k: usize,
    pub tensor: Array3<f64>,
}

#[derive(Debug, Clone)]
pub struct CoreSolution {
    pub cores: Vec<DiscreteCore>,
    /// `||A_{k-1} G_k - B_k||_F` for `k = 2..=d` (index 0 is `k = 2`).
    pub residuals: Vec<f64>,
    /// Frobenius norms of the right-hand sides, same indexing.
    pub rhs_norms: Vec<f64>,
}

/// Solves the discrete core equations in chain order.
pub fn solve_cores(sketches: &[SketchPair]) -> Result<CoreSolution> {
    let d = sketches.len();
    if d < 2 {
        return Err(Error::Argument("need at least two sketch pairs".into()));
    }
    for (idx, sp) in sketches.iter().enumerate() {
        if sp.k != idx + 1 {
            return Err(Error::Argument(format!("sketch {idx} has index {}, expected {}", sp.k, idx + 1)));
        }
    }
    let m = sketches[0].b.nrows();
    let r1 = sketches[0].rank;
    let g1 = sketches[0].b.clone().into_shape_with_order((1, m, r1)).map_err(|e| Error::Construction(e.to_string()))?;
    let mut cores = vec![DiscreteCore { k: 1, tensor: g1 }];
    let mut residuals = Vec::with_capacity(d - 1);
    let mut rhs_norms = Vec::with_capacity(d - 1);

    for k in 2..=d {
        let prev = &sketches[k - 2];
        let a = prev.a.as_ref().ok_or_else(|| Error::Argument(format!("sketch {} lacks an A matrix", k - 1)))?;
        let cur = &sketches[k - 1];
        let r_left = a.ncols();
        let (rhs, r_right) = if k == d {
            if cur.b.dim() != (m, m) {
                return Err(Error::Argument("last sketch must be M x M".into()));
            }
            (cur.b.clone(), 1)
        } else {
            let r = cur.rank;
            if cur.b.dim() != (m * m, r) {
                return Err(Error::Argument(format!(
                    "sketch {k} has shape {:?}, expected ({}, {r})",
                    cur.b.dim(),
                    m * m
                )));
            }
            // Row (beta, i) of B_k becomes row beta, column (i, alpha) of the RHS.
            let rhs =
                cur.b.clone().into_shape_with_order((m, m * r)).map_err(|e| Error::Construction(e.to_string()))?;
            (rhs, r)
        };
        if a.nrows() != rhs.nrows() {
            return Err(Error::Argument(format!("A_{} has {} rows but B_{k} has {}", k - 1, a.nrows(), rhs.nrows())));
        }
        let sol = linalg::lstsq(a.view(), rhs.view());
        if sol.rank < r_left {
            log::warn!("A_{} is rank deficient ({} < {r_left}); using the minimum-norm core", k - 1, sol.rank);
        }
        residuals.push(sol.residual);
        rhs_norms.push(rhs.iter().map(|v| v * v).sum::<f64>().sqrt());
        let tensor =
            sol.solution.into_shape_with_order((r_left, m, r_right)).map_err(|e| Error::Construction(e.to_string()))?;
        cores.push(DiscreteCore { k, tensor });
    }
    Ok(CoreSolution { cores, residuals, rhs_norms })
}

/// Builds the continuous TT and rescales the first core so it integrates to one.
pub fn assemble_tt(cores: &[DiscreteCore], basis: BasisSpec) -> Result<FunctionalTT> {
    if cores.len() < 2 {
        return Err(Error::Construction("a density TT needs d >= 2 cores".into()));
    }
    let tt = FunctionalTT::new(basis, cores.iter().map(|c| c.tensor.clone()).collect())?;
    normalize(tt)
}

/// Divides core 1 by the integral.
pub fn normalize(mut tt: FunctionalTT) -> Result<FunctionalTT> {
    let z = tt.integral();
    if !z.is_finite() || z == 0.0 {
        return Err(Error::Construction(format!("normalization constant is {z}; cannot normalize")));
    }
    tt.scale_core(0, 1.0 / z);
    Ok(tt)
}
