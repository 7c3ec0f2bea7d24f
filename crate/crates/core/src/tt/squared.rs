use ndarray::{Array2, Array3};

use super::{tt_inner, FunctionalTT};
use crate::basis::{gauss_legendre, BasisSpec};
use crate::error::{Error, Result};

/// A density `r(x)^2` where `r` is a functional TT whose discrete coefficient
/// tensor has unit Frobenius norm, so the density integrates to one exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredTT {
    inner: FunctionalTT,
}

impl SquaredTT {
    /// Rescales `inner` to unit Frobenius norm.
    pub fn new(mut inner: FunctionalTT) -> Result<Self> {
        let norm = tt_inner(&inner, &inner)?.sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Construction(format!("cannot normalize a squared TT with norm {norm}")));
        }
        inner.scale_core(0, 1.0 / norm);
        Ok(Self { inner })
    }

    /// Wraps cores that are already normalized, without rescaling.
    pub(crate) fn from_normalized(inner: FunctionalTT) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &FunctionalTT {
        &self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn basis(&self) -> BasisSpec {
        self.inner.basis()
    }

    pub fn frobenius_norm(&self) -> f64 {
        tt_inner(&self.inner, &self.inner).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let r = self.inner.eval(x)?;
        Ok(r * r)
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let r = self.inner.eval_unchecked(x);
        r * r
    }

    /// The amplitude `r(x)` and its gradient.
    pub(crate) fn amplitude_with_grad_unchecked(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.inner.eval_with_grad_unchecked(x)
    }

    /// The same density as an ordinary functional TT with `2M - 1` basis functions
    /// and squared ranks. Exact up to rounding, since `L_i L_j` has degree at most `2M - 2`.
    pub fn to_functional(&self) -> Result<FunctionalTT> {
        let basis = self.inner.basis();
        let m = basis.size();
        let m2 = 2 * m - 1;
        let wide = BasisSpec::new(m2, basis.interval())?;
        let rule = gauss_legendre(m2, basis.interval())?;
        let narrow_tab = basis.table(&rule.nodes);
        let wide_tab = wide.table(&rule.nodes);
        // triple[m][(i, j)] = integral of L_i L_j L_m.
        let triple: Vec<Array2<f64>> = (0..m2)
            .map(|mm| {
                Array2::from_shape_fn((m, m), |(i, j)| {
                    (0..rule.len())
                        .map(|q| rule.weights[q] * narrow_tab[[q, i]] * narrow_tab[[q, j]] * wide_tab[[q, mm]])
                        .sum()
                })
            })
            .collect();
        let cores = self
            .inner
            .cores()
            .iter()
            .map(|h| {
                let (s0, _, s1) = h.dim();
                let mut out = Array3::<f64>::zeros((s0 * s0, m2, s1 * s1));
                for a in 0..s0 {
                    for b in 0..s1 {
                        let h1: Vec<f64> = (0..m).map(|i| h[[a, i, b]]).collect();
                        for a2 in 0..s0 {
                            for b2 in 0..s1 {
                                let h2: Vec<f64> = (0..m).map(|j| h[[a2, j, b2]]).collect();
                                for (mm, t) in triple.iter().enumerate() {
                                    let mut acc = 0.0;
                                    for i in 0..m {
                                        if h1[i] == 0.0 {
                                            continue;
                                        }
                                        let row: f64 = (0..m).map(|j| t[[i, j]] * h2[j]).sum();
                                        acc += h1[i] * row;
                                    }
                                    out[[a * s0 + a2, mm, b * s1 + b2]] = acc;
                                }
                            }
                        }
                    }
                }
                out
            })
            .collect();
        FunctionalTT::new(wide, cores)
    }
}
