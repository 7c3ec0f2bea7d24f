//! Functional tensor trains over an orthonormal Legendre basis.

mod base;
mod born;
mod io;
mod sample;
mod squared;

pub use base::{BaseDensity, BaseSampler, LOG_FLOOR_EPS};
pub use born::{born_fit, born_objective, BornConfig, BornFit};
pub use io::{read_tt_json, write_tt_json, TtDocument, TtFile};
pub use sample::{TtSampler, DEFAULT_GRID};
pub use squared::SquaredTT;

use ndarray::{Array2, Array3};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};

/// `p(x) = G_1(x_1) ... G_d(x_d)` with `G_k(x) = sum_i core_k[:, i, :] L_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTT {
    basis: BasisSpec,
    cores: Vec<Array3<f64>>,
}

impl FunctionalTT {
    pub fn new(basis: BasisSpec, cores: Vec<Array3<f64>>) -> Result<Self> {
        let d = cores.len();
        if d < 1 {
            return Err(Error::Construction("a TT needs at least one core".into()));
        }
        let m = basis.size();
        let mut left = 1;
        for (k, c) in cores.iter().enumerate() {
            let (r0, mm, r1) = c.dim();
            if r0 != left {
                return Err(Error::Construction(format!("core {} has left rank {r0}, expected {left}", k + 1)));
            }
            if mm != m {
                return Err(Error::Construction(format!("core {} has {mm} basis coefficients, basis has {m}", k + 1)));
            }
            if r1 == 0 {
                return Err(Error::Construction(format!("core {} has zero right rank", k + 1)));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Construction(format!("core {} has non-finite entries", k + 1)));
            }
            left = r1;
        }
        if left != 1 {
            return Err(Error::Construction(format!("last core has right rank {left}, expected 1")));
        }
        Ok(Self { basis, cores })
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    /// Bond dimensions `r_1, ..., r_{d-1}`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1].iter().map(|c| c.dim().2).collect()
    }

    pub fn scale_core(&mut self, k: usize, factor: f64) {
        self.cores[k].mapv_inplace(|v| v * factor);
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Argument(format!("point has {} coordinates, TT has {}", x.len(), self.dim())));
        }
        let iv = self.basis.interval();
        if let Some((k, v)) = x.iter().enumerate().find(|(_, v)| !iv.contains(**v)) {
            return Err(Error::Domain(format!("coordinate {} = {v} outside [{}, {}]", k + 1, iv.lower(), iv.upper())));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let m = self.basis.size();
        let mut phi = vec![0.0; m];
        let mut v = vec![1.0];
        for (k, core) in self.cores.iter().enumerate() {
            self.basis.eval_into(x[k], &mut phi);
            v = left_step(&v, core, &phi);
        }
        v[0]
    }

    /// Value and gradient in one left/right sweep. Requires `x` inside the box.
    pub fn eval_with_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_point(x)?;
        Ok(self.eval_with_grad_unchecked(x))
    }

    pub(crate) fn eval_with_grad_unchecked(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let m = self.basis.size();
        let mut phis = vec![vec![0.0; m]; d];
        let mut ders = vec![vec![0.0; m]; d];
        for k in 0..d {
            self.basis.eval_with_deriv_into(x[k], &mut phis[k], &mut ders[k]);
        }
        let mut lefts = Vec::with_capacity(d + 1);
        lefts.push(vec![1.0]);
        for k in 0..d {
            let next = left_step(&lefts[k], &self.cores[k], &phis[k]);
            lefts.push(next);
        }
        let mut right = vec![1.0];
        let mut grad = vec![0.0; d];
        for k in (0..d).rev() {
            grad[k] = sandwich(&lefts[k], &self.cores[k], &ders[k], &right);
            right = right_step(&self.cores[k], &phis[k], &right);
        }
        (lefts[d][0], grad)
    }

    /// Exact integral over the box.
    pub fn integral(&self) -> f64 {
        let w = self.basis.interval().constant_mass();
        let mut v = vec![1.0];
        for core in &self.cores {
            let (r0, _, r1) = core.dim();
            let mut next = vec![0.0; r1];
            for a in 0..r0 {
                for (b, n) in next.iter_mut().enumerate() {
                    *n += v[a] * core[[a, 0, b]] * w;
                }
            }
            v = next;
        }
        v[0]
    }

    /// Right all-one contractions: entry `k` integrates cores `k..d` (0-based), entry `d` is `[1]`.
    pub(crate) fn right_integrals(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let w = self.basis.interval().constant_mass();
        let mut out = vec![Vec::new(); d + 1];
        out[d] = vec![1.0];
        for k in (0..d).rev() {
            let core = &self.cores[k];
            let (r0, _, r1) = core.dim();
            out[k] = (0..r0).map(|a| (0..r1).map(|b| core[[a, 0, b]] * w * out[k + 1][b]).sum()).collect();
        }
        out
    }

    /// Legendre coefficients of `x_k -> integral of p(fixed, x_k, rest) d rest`,
    /// where `k = fixed.len() + 1`.
    pub fn conditional(&self, fixed: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if fixed.len() >= d {
            return Err(Error::Argument(format!(
                "{} fixed coordinates leave nothing free in dimension {d}",
                fixed.len()
            )));
        }
        let iv = self.basis.interval();
        if let Some(v) = fixed.iter().find(|v| !iv.contains(**v)) {
            return Err(Error::Domain(format!("fixed coordinate {v} outside the box")));
        }
        let mut phi = vec![0.0; self.basis.size()];
        let mut left = vec![1.0];
        for (k, &xk) in fixed.iter().enumerate() {
            self.basis.eval_into(xk, &mut phi);
            left = left_step(&left, &self.cores[k], &phi);
        }
        let rights = self.right_integrals();
        Ok(conditional_coeffs(&left, &self.cores[fixed.len()], &rights[fixed.len() + 1]))
    }

    /// The `r_{k-1} x r_k` matrix `G_k(x)`.
    pub fn core_matrix(&self, k: usize, x: f64) -> Result<Array2<f64>> {
        let mut phi = vec![0.0; self.basis.size()];
        if !self.basis.interval().contains(x) {
            return Err(Error::Domain(format!("{x} outside the box")));
        }
        self.basis.eval_into(x, &mut phi);
        let core = &self.cores[k];
        let (r0, m, r1) = core.dim();
        Ok(Array2::from_shape_fn((r0, r1), |(a, b)| (0..m).map(|i| core[[a, i, b]] * phi[i]).sum()))
    }
}

/// `v' = v * sum_i core[:, i, :] phi_i`.
pub(crate) fn left_step(v: &[f64], core: &Array3<f64>, phi: &[f64]) -> Vec<f64> {
    let (r0, m, r1) = core.dim();
    let mut out = vec![0.0; r1];
    for a in 0..r0 {
        let va = v[a];
        if va == 0.0 {
            continue;
        }
        for i in 0..m {
            let c = va * phi[i];
            for (b, o) in out.iter_mut().enumerate() {
                *o += c * core[[a, i, b]];
            }
        }
    }
    out
}

pub(crate) fn right_step(core: &Array3<f64>, phi: &[f64], v: &[f64]) -> Vec<f64> {
    let (r0, m, r1) = core.dim();
    let mut out = vec![0.0; r0];
    for (a, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..m {
            let mut s = 0.0;
            for b in 0..r1 {
                s += core[[a, i, b]] * v[b];
            }
            acc += phi[i] * s;
        }
        *o = acc;
    }
    out
}

fn sandwich(left: &[f64], core: &Array3<f64>, phi: &[f64], right: &[f64]) -> f64 {
    let (r0, m, r1) = core.dim();
    let mut total = 0.0;
    for a in 0..r0 {
        for i in 0..m {
            let mut s = 0.0;
            for b in 0..r1 {
                s += core[[a, i, b]] * right[b];
            }
            total += left[a] * phi[i] * s;
        }
    }
    total
}

pub(crate) fn conditional_coeffs(left: &[f64], core: &Array3<f64>, right: &[f64]) -> Vec<f64> {
    let (r0, m, r1) = core.dim();
    (0..m)
        .map(|i| {
            let mut s = 0.0;
            for a in 0..r0 {
                for b in 0..r1 {
                    s += left[a] * core[[a, i, b]] * right[b];
                }
            }
            s
        })
        .collect()
}

/// L2 inner product of two functional TTs sharing an interval. Basis sizes may
/// differ; orthonormality keeps only the common coefficients.
pub fn tt_inner(p: &FunctionalTT, q: &FunctionalTT) -> Result<f64> {
    if p.basis.interval() != q.basis.interval() {
        return Err(Error::Configuration("TTs live on different intervals".into()));
    }
    if p.dim() != q.dim() {
        return Err(Error::Configuration(format!("TT dimensions differ: {} vs {}", p.dim(), q.dim())));
    }
    let m = p.basis.size().min(q.basis.size());
    let mut env = Array2::<f64>::ones((1, 1));
    for (pc, qc) in p.cores.iter().zip(&q.cores) {
        env = transfer(&env, pc, qc, m);
    }
    Ok(env[[0, 0]])
}

/// `env'[b, b'] = sum_{a, a', i < m} env[a, a'] P[a, i, b] Q[a', i, b']`.
pub(crate) fn transfer(env: &Array2<f64>, pc: &Array3<f64>, qc: &Array3<f64>, m: usize) -> Array2<f64> {
    let (r0, _, r1) = pc.dim();
    let (s0, _, s1) = qc.dim();
    let mut out = Array2::<f64>::zeros((r1, s1));
    let mut tmp = Array2::<f64>::zeros((r1, s0));
    for i in 0..m {
        tmp.fill(0.0);
        for a in 0..r0 {
            for b in 0..r1 {
                let p = pc[[a, i, b]];
                if p == 0.0 {
                    continue;
                }
                for a2 in 0..s0 {
                    tmp[[b, a2]] += p * env[[a, a2]];
                }
            }
        }
        for b in 0..r1 {
            for a2 in 0..s0 {
                let t = tmp[[b, a2]];
                if t == 0.0 {
                    continue;
                }
                for b2 in 0..s1 {
                    out[[b, b2]] += t * qc[[a2, i, b2]];
                }
            }
        }
    }
    out
}

/// Value of `sum_i c_i L_i` at `x`.
#[cfg(test)]
pub(crate) fn eval_series(basis: &BasisSpec, coeffs: &[f64], x: f64, scratch: &mut [f64]) -> f64 {
    basis.eval_into(x, scratch);
    scratch.iter().zip(coeffs).map(|(p, c)| p * c).sum()
}
