//! Unnormalized target densities and a random-walk Metropolis sampler that produces
//! the train/test sample sets.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::Interval;
use crate::error::{Error, Result};
use crate::json::write_json;
use crate::samples::SampleSet;

/// `-v(x)/2` for the scaled Rosenbrock function; `-inf` outside `[-1, 1]^d`.
pub fn rosenbrock_logp(x: &[f64], c: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), c.len());
    if x.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return f64::NEG_INFINITY;
    }
    let mut v = 0.0;
    for i in 0..x.len().saturating_sub(1) {
        let a = c[i] * c[i] * x[i] * x[i];
        let b = c[i + 1] * x[i + 1] + 5.0 * (a + 1.0);
        v += a + b * b;
    }
    -0.5 * v
}

/// `c_i = 2` for `i <= d-2`, `c_{d-1} = 7`, `c_d = 200`.
pub fn rosenbrock_default_scales(d: usize) -> Vec<f64> {
    let mut c = vec![2.0; d];
    if d >= 2 {
        c[d - 2] = 7.0;
    }
    if d >= 1 {
        c[d - 1] = 200.0;
    }
    c
}

/// 1D Ginzburg-Landau energy with Dirichlet ends `x_0 = x_{d+1} = 0`.
pub fn gl1d_energy(x: &[f64], delta: f64, h_grid: f64) -> f64 {
    let d = x.len();
    let at = |i: usize| if i == 0 || i == d + 1 { 0.0 } else { x[i - 1] };
    let mut e = 0.0;
    for i in 1..=d + 1 {
        let g = (at(i) - at(i - 1)) / h_grid;
        let w = 1.0 - at(i) * at(i);
        e += 0.5 * delta * g * g + w * w / (4.0 * delta);
    }
    e
}

/// 2D Ginzburg-Landau energy on a periodic square lattice; `x[[i, j]]` is `x_{i+1, j+1}`.
pub fn gl2d_energy(x: ArrayView2<'_, f64>, delta: f64, h_grid: f64) -> Result<f64> {
    let (n, m) = x.dim();
    if n != m || n == 0 {
        return Err(Error::Argument(format!("2D lattice must be square, got {n}x{m}")));
    }
    let mut e = 0.0;
    for i in 0..n {
        let ip = (i + n - 1) % n;
        for j in 0..n {
            let jp = (j + n - 1) % n;
            let v = x[[i, j]];
            let gi = (v - x[[ip, j]]) / h_grid;
            let gj = (v - x[[i, jp]]) / h_grid;
            let w = 1.0 - v * v;
            e += 0.5 * delta * (gi * gi + gj * gj) + w * w / (4.0 * delta);
        }
    }
    Ok(e)
}

/// 1-based position of lattice site `(i, j)` along the snake path.
pub fn snake_order(i: usize, j: usize, side: usize) -> Result<usize> {
    if i < 1 || i > side || j < 1 || j > side {
        return Err(Error::Argument(format!("site ({i}, {j}) outside a {side}x{side} lattice")));
    }
    Ok(if i % 2 == 1 { (i - 1) * side + j } else { (i - 1) * side + side + 1 - j })
}

/// Rebuilds the lattice from its snake-ordered vector.
pub fn snake_to_lattice(v: &[f64]) -> Result<Array2<f64>> {
    let side = lattice_side(v.len())?;
    let mut x = Array2::zeros((side, side));
    for i in 1..=side {
        for j in 1..=side {
            x[[i - 1, j - 1]] = v[snake_order(i, j, side)? - 1];
        }
    }
    Ok(x)
}

fn lattice_side(d: usize) -> Result<usize> {
    let side = (d as f64).sqrt().round() as usize;
    if side * side != d || side == 0 {
        return Err(Error::Argument(format!("dimension {d} is not a perfect square")));
    }
    Ok(side)
}

/// Which target, with its physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Rosenbrock {
        d: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    Gl1d {
        d: usize,
        beta: f64,
        delta: f64,
        h_grid: f64,
    },
    Gl2d {
        d: usize,
        beta: f64,
        delta: f64,
        h_grid: f64,
    },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Rosenbrock { d, .. } | TargetSpec::Gl1d { d, .. } | TargetSpec::Gl2d { d, .. } => *d,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut bad = Vec::new();
        match self {
            TargetSpec::Rosenbrock { d, c } => {
                if *d < 2 {
                    bad.push("target.d: Rosenbrock needs d >= 2".to_string());
                }
                if let Some(c) = c {
                    if c.len() != *d {
                        bad.push(format!("target.c: expected {d} scales, got {}", c.len()));
                    }
                }
            }
            TargetSpec::Gl1d { d, beta, delta, h_grid } | TargetSpec::Gl2d { d, beta, delta, h_grid } => {
                if *d < 1 {
                    bad.push("target.d: must be positive".to_string());
                }
                if matches!(self, TargetSpec::Gl2d { .. }) && lattice_side(*d).is_err() {
                    bad.push(format!("target.d: {d} is not a perfect square"));
                }
                for (key, v) in [("beta", beta), ("delta", delta), ("h_grid", h_grid)] {
                    if !(*v > 0.0 && v.is_finite()) {
                        bad.push(format!("target.{key}: must be positive, got {v}"));
                    }
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }

    pub fn build(&self) -> Result<TargetDensity> {
        self.validate().map_err(Error::Validation)?;
        let (interval, name) = match self {
            TargetSpec::Rosenbrock { .. } => (Interval::new(-1.0, 1.0)?, "rosenbrock"),
            TargetSpec::Gl1d { .. } => (Interval::new(-3.0, 3.0)?, "gl1d"),
            TargetSpec::Gl2d { .. } => (Interval::new(-3.0, 3.0)?, "gl2d"),
        };
        let scales = match self {
            TargetSpec::Rosenbrock { d, c } => c.clone().unwrap_or_else(|| rosenbrock_default_scales(*d)),
            _ => Vec::new(),
        };
        Ok(TargetDensity { spec: self.clone(), interval, name, scales })
    }
}

/// An unnormalized log-density on a box `I^d`, zero density outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDensity {
    spec: TargetSpec,
    interval: Interval,
    name: &'static str,
    scales: Vec<f64>,
}

impl TargetDensity {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    /// Log of the unnormalized density, inverse temperature included.
    pub fn log_unnormalized(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !self.interval.contains(*v)) {
            return f64::NEG_INFINITY;
        }
        match &self.spec {
            TargetSpec::Rosenbrock { .. } => rosenbrock_logp(x, &self.scales),
            TargetSpec::Gl1d { beta, delta, h_grid, .. } => -beta * gl1d_energy(x, *delta, *h_grid),
            TargetSpec::Gl2d { beta, delta, h_grid, .. } => {
                let lattice = snake_to_lattice(x).expect("validated dimension");
                -beta * gl2d_energy(lattice.view(), *delta, *h_grid).expect("square lattice")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    /// One entry per coordinate, or a single entry used for all of them.
    pub proposal_std: Vec<f64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_burn_in() -> usize {
    10_000
}
fn default_thinning() -> usize {
    10
}
fn default_chains() -> usize {
    8
}

impl McmcConfig {
    pub fn new(proposal_std: Vec<f64>, seed: u64) -> Self {
        Self { proposal_std, burn_in: default_burn_in(), thinning: default_thinning(), chains: default_chains(), seed }
    }

    pub fn validate(&self, d: usize) -> std::result::Result<(), Vec<String>> {
        let mut bad = Vec::new();
        if self.thinning < 1 {
            bad.push("mcmc.thinning: must be at least 1".to_string());
        }
        if self.chains < 1 {
            bad.push("mcmc.chains: must be at least 1".to_string());
        }
        if !(self.proposal_std.len() == 1 || self.proposal_std.len() == d) {
            bad.push(format!("mcmc.proposal_std: expected 1 or {d} entries, got {}", self.proposal_std.len()));
        }
        if self.proposal_std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            bad.push("mcmc.proposal_std: entries must be positive".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }

    fn stds(&self, d: usize) -> Vec<f64> {
        if self.proposal_std.len() == 1 {
            vec![self.proposal_std[0]; d]
        } else {
            self.proposal_std.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcReport {
    /// Post-burn-in acceptance rate over all chains.
    pub acceptance: f64,
    /// Global proposal multiplier reached by the burn-in adaptation.
    pub scale: f64,
    /// Set when the acceptance rate fell outside `[0.05, 0.8]`.
    pub suggested_proposal_std: Option<Vec<f64>>,
}

struct Chain {
    rng: ChaCha8Rng,
    x: Vec<f64>,
    logp: f64,
    accepted: u64,
    proposed: u64,
}

impl Chain {
    fn step(&mut self, target: &TargetDensity, stds: &[f64], scale: f64, prop: &mut [f64]) -> bool {
        for ((p, x), s) in prop.iter_mut().zip(&self.x).zip(stds) {
            *p = x + scale * s * self.rng.sample::<f64, _>(StandardNormal);
        }
        let lp = target.log_unnormalized(prop);
        self.proposed += 1;
        let u: f64 = self.rng.random();
        if lp > f64::NEG_INFINITY && u.ln() < lp - self.logp {
            self.x.copy_from_slice(prop);
            self.logp = lp;
            self.accepted += 1;
            true
        } else {
            false
        }
    }
}

/// Random-walk Metropolis with independent chains interleaved round-robin.
///
/// During burn-in a global multiplier on `proposal_std` is adapted towards 30%
/// acceptance; it is frozen afterwards so the kept states come from a fixed kernel.
pub fn mcmc_sample(target: &TargetDensity, n: usize, cfg: &McmcConfig) -> Result<(SampleSet, McmcReport)> {
    let (data, report) = mcmc_matrix(target, n, cfg)?;
    Ok((SampleSet::new(data, target.interval())?, report))
}

/// As [`mcmc_sample`], returning the raw `n x d` matrix (also valid for `d = 1`).
pub fn mcmc_matrix(target: &TargetDensity, n: usize, cfg: &McmcConfig) -> Result<(Array2<f64>, McmcReport)> {
    let d = target.dim();
    if n == 0 {
        return Err(Error::Argument("need at least one sample".into()));
    }
    cfg.validate(d).map_err(Error::Validation)?;
    let stds = cfg.stds(d);
    let iv = target.interval();
    let mut chains: Vec<Chain> = (0..cfg.chains)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64 + 1);
            let x: Vec<f64> = (0..d).map(|_| iv.lower() + 0.5 * iv.width() * (0.5 + rng.random::<f64>())).collect();
            let logp = target.log_unnormalized(&x);
            Chain { rng, x, logp, accepted: 0, proposed: 0 }
        })
        .collect();
    let mut prop = vec![0.0; d];

    let mut log_scale = 0.0f64;
    let window = 100;
    for chain in chains.iter_mut() {
        let mut acc = 0usize;
        for t in 1..=cfg.burn_in {
            acc += chain.step(target, &stds, log_scale.exp(), &mut prop) as usize;
            if t % window == 0 {
                let rate = acc as f64 / window as f64;
                log_scale += (rate - 0.3) / (1.0 + (t / window) as f64).sqrt();
                acc = 0;
            }
        }
        chain.accepted = 0;
        chain.proposed = 0;
    }
    let scale = log_scale.exp();

    let mut out = Array2::<f64>::zeros((n, d));
    for r in 0..n {
        let chain = &mut chains[r % cfg.chains];
        for _ in 0..cfg.thinning {
            chain.step(target, &stds, scale, &mut prop);
        }
        out.row_mut(r).assign(&ndarray::ArrayView1::from(&chain.x));
    }
    let accepted: u64 = chains.iter().map(|c| c.accepted).sum();
    let proposed: u64 = chains.iter().map(|c| c.proposed).sum();
    let acceptance = accepted as f64 / proposed as f64;
    let suggested_proposal_std = if (0.05..=0.8).contains(&acceptance) {
        None
    } else {
        let factor = scale * if acceptance < 0.05 { 0.5 } else { 2.0 };
        let s: Vec<f64> = stds.iter().map(|v| v * factor).collect();
        log::warn!("MCMC acceptance rate {acceptance:.3} is outside [0.05, 0.8]; try proposal_std {s:?}");
        Some(s)
    };
    Ok((out, McmcReport { acceptance, scale, suggested_proposal_std }))
}

/// Sidecar written next to a sample CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub target: TargetSpec,
    pub interval: [f64; 2],
    pub rows: usize,
    pub mcmc: McmcConfig,
    pub report: McmcReport,
}

pub fn write_sidecar(path: &Path, sidecar: &SampleSidecar) -> Result<()> {
    write_json(path, sidecar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::gauss_legendre;
    use ndarray::Axis;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn rosenbrock_at_origin() {
        for d in 2..8 {
            let c = rosenbrock_default_scales(d);
            assert_eq!(rosenbrock_logp(&vec![0.0; d], &c), -25.0 * (d as f64 - 1.0) / 2.0);
        }
        assert_eq!(rosenbrock_default_scales(10), vec![2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 7.0, 200.0]);
        assert_eq!(rosenbrock_logp(&[1.5, 0.0], &[7.0, 200.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn rosenbrock_matches_straight_line_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = rosenbrock_default_scales(4);
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t1 = c[0].powi(2) * x[0].powi(2) + (c[1] * x[1] + 5.0 * (c[0].powi(2) * x[0].powi(2) + 1.0)).powi(2);
            let t2 = c[1].powi(2) * x[1].powi(2) + (c[2] * x[2] + 5.0 * (c[1].powi(2) * x[1].powi(2) + 1.0)).powi(2);
            let t3 = c[2].powi(2) * x[2].powi(2) + (c[3] * x[3] + 5.0 * (c[2].powi(2) * x[2].powi(2) + 1.0)).powi(2);
            let want = -(t1 + t2 + t3) / 2.0;
            let got = rosenbrock_logp(&x, &c);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn gl1d_hand_values() {
        assert!((gl1d_energy(&[0.0; 8], 0.5, 1.0) - 4.5).abs() < 1e-15);
        assert!((gl1d_energy(&[1.0, 1.0], 1.0, 1.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn gl2d_hand_values() {
        let ones = Array2::from_elem((4, 4), 1.0);
        assert_eq!(gl2d_energy(ones.view(), 0.7, 0.3).unwrap(), 0.0);
        let zeros = Array2::zeros((4, 4));
        assert!((gl2d_energy(zeros.view(), 1.0, 1.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(gl2d_energy(Array2::zeros((2, 3)).view(), 1.0, 1.0).is_err());
    }

    #[test]
    fn snake_order_follows_the_path() {
        assert_eq!(snake_order(1, 1, 4).unwrap(), 1);
        assert_eq!(snake_order(1, 4, 4).unwrap(), 4);
        assert_eq!(snake_order(2, 4, 4).unwrap(), 5);
        assert_eq!(snake_order(2, 1, 4).unwrap(), 8);
        assert!(snake_order(0, 1, 4).is_err());
        assert!(snake_order(1, 5, 4).is_err());
        let mut seen = [false; 16];
        for i in 1..=4 {
            for j in 1..=4 {
                let k = snake_order(i, j, 4).unwrap();
                assert!(!seen[k - 1]);
                seen[k - 1] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn snake_energy_equals_matrix_energy_on_all_sign_patterns() {
        let target = TargetSpec::Gl2d { d: 16, beta: 1.0, delta: 0.8, h_grid: 0.6 }.build().unwrap();
        for bits in 0u32..(1 << 16) {
            let mut lattice = Array2::zeros((4, 4));
            for i in 0..4 {
                for j in 0..4 {
                    lattice[[i, j]] = if bits >> (4 * i + j) & 1 == 1 { 1.0 } else { -1.0 };
                }
            }
            let mut v = vec![0.0; 16];
            for i in 1..=4 {
                for j in 1..=4 {
                    v[snake_order(i, j, 4).unwrap() - 1] = lattice[[i - 1, j - 1]];
                }
            }
            let want = gl2d_energy(lattice.view(), 0.8, 0.6).unwrap();
            assert_eq!(-target.log_unnormalized(&v), want);
        }
    }

    #[test]
    fn doubling_beta_squares_the_density() {
        let a = TargetSpec::Gl1d { d: 5, beta: 1.5, delta: 0.5, h_grid: 1.0 }.build().unwrap();
        let b = TargetSpec::Gl1d { d: 5, beta: 3.0, delta: 0.5, h_grid: 1.0 }.build().unwrap();
        let x = [0.3, -1.2, 0.9, 2.0, -0.1];
        assert!((2.0 * a.log_unnormalized(&x) - b.log_unnormalized(&x)).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_box_and_are_reproducible() {
        let target = TargetSpec::Rosenbrock { d: 3, c: None }.build().unwrap();
        let mut cfg = McmcConfig::new(vec![0.05, 0.02, 0.003], 9);
        cfg.burn_in = 2000;
        let (a, _) = mcmc_sample(&target, 500, &cfg).unwrap();
        let (b, _) = mcmc_sample(&target, 500, &cfg).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn double_well_histogram_matches_quadrature() {
        let target = TargetSpec::Gl1d { d: 1, beta: 2.0, delta: 0.5, h_grid: 1.0 }.build().unwrap();
        let mut cfg = McmcConfig::new(vec![0.8], 1);
        cfg.thinning = 5;
        let n = 100_000;
        let (s, rep) = mcmc_matrix(&target, n, &cfg).unwrap();
        assert!(rep.acceptance > 0.05);
        let bins = 30;
        let width = 6.0 / bins as f64;
        let mut hist = vec![0.0; bins];
        for v in s.iter() {
            hist[(((v + 3.0) / width) as usize).min(bins - 1)] += 1.0 / n as f64;
        }
        let q = gauss_legendre(20, Interval::new(0.0, width).unwrap()).unwrap();
        let mass: Vec<f64> = (0..bins)
            .map(|b| {
                let lo = -3.0 + b as f64 * width;
                q.nodes.iter().zip(&q.weights).map(|(x, w)| w * target.log_unnormalized(&[lo + x]).exp()).sum()
            })
            .collect();
        let z: f64 = mass.iter().sum();
        let tv: f64 = 0.5 * hist.iter().zip(&mass).map(|(h, m)| (h - m / z).abs()).sum::<f64>();
        assert!(tv < 0.02, "TV distance {tv}");
    }

    #[test]
    fn config_validation_lists_keys() {
        let cfg = McmcConfig { proposal_std: vec![0.1, -1.0], burn_in: 0, thinning: 0, chains: 0, seed: 0 };
        let errs = cfg.validate(3).unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
        let bad = TargetSpec::Gl2d { d: 10, beta: 1.0, delta: 1.0, h_grid: 1.0 };
        assert!(bad.build().is_err());
    }

    #[test]
    fn interleaving_uses_every_chain() {
        let target = TargetSpec::Gl1d { d: 2, beta: 1.0, delta: 0.5, h_grid: 1.0 }.build().unwrap();
        let mut cfg = McmcConfig::new(vec![0.5], 3);
        cfg.burn_in = 100;
        let (s, _) = mcmc_sample(&target, 16, &cfg).unwrap();
        let rows: Vec<Vec<f64>> = s.data().axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
        assert_ne!(rows[0], rows[1]);
    }

    proptest! {
        #[test]
        fn gl1d_is_even(x in proptest::collection::vec(-3.0f64..3.0, 1..10), delta in 0.1f64..2.0, h in 0.1f64..2.0) {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((gl1d_energy(&x, delta, h) - gl1d_energy(&neg, delta, h)).abs() <= 1e-12 * gl1d_energy(&x, delta, h).max(1.0));
        }

        #[test]
        fn gl2d_is_shift_invariant(v in proptest::collection::vec(-3.0f64..3.0, 9), di in 0usize..3, dj in 0usize..3) {
            let x = Array2::from_shape_vec((3, 3), v).unwrap();
            let shifted = Array2::from_shape_fn((3, 3), |(i, j)| x[[(i + di) % 3, (j + dj) % 3]]);
            let a = gl2d_energy(x.view(), 0.7, 0.9).unwrap();
            let b = gl2d_energy(shifted.view(), 0.7, 0.9).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
