use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::net::PotentialNet;
use crate::error::{Error, Result};
use crate::tt::BaseDensity;

/// Columns per batched field evaluation.
pub(crate) const CHUNK: usize = 32;

/// A scalar potential whose gradient drives the flow.
pub trait Potential {
    fn dim(&self) -> usize;
    /// `grad phi` at the columns of `x` (`d x B`).
    fn velocity(&self, x: ArrayView2<'_, f64>) -> Array2<f64>;
    /// `grad phi` and the Laplacian of `phi` at the columns of `x`.
    fn field(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>);
}

impl Potential for PotentialNet {
    fn dim(&self) -> usize {
        PotentialNet::dim(self)
    }

    fn velocity(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.velocity_batch(x)
    }

    fn field(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
        self.field_batch(x)
    }
}

/// Time horizon `T` and RK4 step `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tau: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { horizon: 0.2, tau: 0.01 }
    }
}

impl FlowConfig {
    pub fn new(horizon: f64, tau: f64) -> Result<Self> {
        let cfg = Self { horizon, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Argument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.horizon >= self.tau && self.horizon.is_finite()) {
            return Err(Error::Argument(format!(
                "T must be at least tau, got T = {} and tau = {}",
                self.horizon, self.tau
            )));
        }
        Ok(())
    }

    /// `floor(T / tau)`, robust to the rounding in e.g. `0.2 / 0.01`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.tau + 1e-9).floor() as usize
    }
}

fn column_finite(x: &Array2<f64>, col: usize) -> bool {
    x.column(col).iter().all(|v| v.is_finite())
}

/// RK4 on `dx/dt = grad phi(x)` with step `h` (negative for the inverse map).
/// Returns the end states and, per column, the first step after which it was non-finite.
pub fn integrate<P: Potential + ?Sized>(
    potential: &P,
    steps: usize,
    h: f64,
    mut x: Array2<f64>,
) -> (Array2<f64>, Vec<Option<usize>>) {
    let b = x.ncols();
    let mut diverged = vec![None; b];
    for step in 0..steps {
        let k1 = potential.velocity(x.view());
        let k2 = potential.velocity((&x + &(&k1 * (0.5 * h))).view());
        let k3 = potential.velocity((&x + &(&k2 * (0.5 * h))).view());
        let k4 = potential.velocity((&x + &(&k3 * h)).view());
        x += &((k1 + &(k2 * 2.0) + &(k3 * 2.0) + &k4) * (h / 6.0));
        for (col, slot) in diverged.iter_mut().enumerate() {
            if slot.is_none() && !column_finite(&x, col) {
                *slot = Some(step);
            }
        }
    }
    (x, diverged)
}

/// Backward integration of the state together with `int_0^T laplacian(phi) dt`.
/// Returns the time-zero states, the accumulated integrals and divergence steps.
pub fn integrate_with_divergence<P: Potential + ?Sized>(
    potential: &P,
    cfg: &FlowConfig,
    mut x: Array2<f64>,
) -> (Array2<f64>, Array1<f64>, Vec<Option<usize>>) {
    let h = -cfg.tau;
    let b = x.ncols();
    let mut ell = Array1::<f64>::zeros(b);
    let mut diverged = vec![None; b];
    for step in 0..cfg.steps() {
        let (k1, l1) = potential.field(x.view());
        let (k2, l2) = potential.field((&x + &(&k1 * (0.5 * h))).view());
        let (k3, l3) = potential.field((&x + &(&k2 * (0.5 * h))).view());
        let (k4, l4) = potential.field((&x + &(&k3 * h)).view());
        x += &((k1 + &(k2 * 2.0) + &(k3 * 2.0) + &k4) * (h / 6.0));
        ell += &((l1 + &(l2 * 2.0) + &(l3 * 2.0) + &l4) * (cfg.tau / 6.0));
        for (col, slot) in diverged.iter_mut().enumerate() {
            if slot.is_none() && !(column_finite(&x, col) && ell[col].is_finite()) {
                *slot = Some(step);
            }
        }
    }
    (x, ell, diverged)
}

/// The flow `q_T = f_# q_0`: a potential network, its time grid and a base density.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub net: PotentialNet,
    pub config: FlowConfig,
    pub base: BaseDensity,
}

impl FlowModel {
    pub fn new(net: PotentialNet, config: FlowConfig, base: BaseDensity) -> Result<Self> {
        config.validate()?;
        if net.dim() != base.dim() {
            return Err(Error::Argument(format!(
                "network dimension {} differs from base dimension {}",
                net.dim(),
                base.dim()
            )));
        }
        Ok(Self { net, config, base })
    }

    pub fn dim(&self) -> usize {
        self.net.dim()
    }

    pub fn forward(&self, x0: &[f64]) -> Result<Vec<f64>> {
        flow_forward(&self.net, &self.config, x0)
    }

    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        flow_inverse(&self.net, &self.config, y)
    }

    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        log_density(&self.net, &self.config, &self.base, y)
    }

    /// Log-densities of the rows of `ys`; `Err(step)` marks a diverged trajectory.
    pub fn log_density_rows(&self, ys: ArrayView2<'_, f64>) -> Vec<std::result::Result<f64, usize>> {
        log_density_rows(&self.net, &self.config, &self.base, ys)
    }

    /// Mean negative log-likelihood of the rows of `batch`.
    pub fn nll(&self, batch: ArrayView2<'_, f64>) -> Result<f64> {
        if batch.nrows() == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        let mut total = 0.0;
        for r in self.log_density_rows(batch) {
            total -= r.map_err(|step| Error::Divergence { step })?;
        }
        Ok(total / batch.nrows() as f64)
    }

    /// Mean NLL over the non-diverged rows, and the number of diverged rows.
    pub fn nll_lenient(&self, batch: ArrayView2<'_, f64>) -> (f64, usize) {
        let mut total = 0.0;
        let mut used = 0usize;
        let mut dropped = 0usize;
        for r in self.log_density_rows(batch) {
            match r {
                Ok(v) => {
                    total -= v;
                    used += 1;
                }
                Err(_) => dropped += 1,
            }
        }
        (if used > 0 { total / used as f64 } else { f64::NAN }, dropped)
    }

    /// `n` base draws pushed through the flow, as rows; diverged draws are dropped
    /// and counted.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<FlowSamples> {
        let sampler = self.base.sampler()?;
        let (x0, fallbacks) = sampler.sample(rng, n);
        let (y, diverged) = push_rows(&self.net, &self.config, x0.view());
        Ok(FlowSamples { samples: y, diverged, base_fallbacks: fallbacks })
    }
}

#[derive(Debug, Clone)]
pub struct FlowSamples {
    pub samples: Array2<f64>,
    pub diverged: usize,
    pub base_fallbacks: usize,
}

/// Pushes each row forward through the flow; diverged rows are removed.
pub fn push_rows<P: Potential + ?Sized>(
    potential: &P,
    cfg: &FlowConfig,
    rows: ArrayView2<'_, f64>,
) -> (Array2<f64>, usize) {
    let d = rows.ncols();
    let mut kept = Vec::with_capacity(rows.len());
    let mut count = 0usize;
    let mut diverged = 0usize;
    for chunk in rows.axis_chunks_iter(Axis(0), CHUNK) {
        let (y, div) = integrate(potential, cfg.steps(), cfg.tau, chunk.t().to_owned());
        for (col, dv) in div.iter().enumerate() {
            if dv.is_some() {
                diverged += 1;
            } else {
                kept.extend(y.column(col).iter());
                count += 1;
            }
        }
    }
    if diverged > 0 {
        log::warn!("{diverged} trajectories diverged and were dropped");
    }
    (Array2::from_shape_vec((count, d), kept).expect("shape"), diverged)
}

pub fn flow_forward<P: Potential + ?Sized>(potential: &P, cfg: &FlowConfig, x0: &[f64]) -> Result<Vec<f64>> {
    single(potential, cfg.steps(), cfg.tau, x0)
}

pub fn flow_inverse<P: Potential + ?Sized>(potential: &P, cfg: &FlowConfig, y: &[f64]) -> Result<Vec<f64>> {
    single(potential, cfg.steps(), -cfg.tau, y)
}

fn single<P: Potential + ?Sized>(potential: &P, steps: usize, h: f64, x: &[f64]) -> Result<Vec<f64>> {
    let col = Array2::from_shape_vec((x.len(), 1), x.to_vec()).map_err(|e| Error::Argument(e.to_string()))?;
    let (out, div) = integrate(potential, steps, h, col);
    match div[0] {
        Some(step) => Err(Error::Divergence { step }),
        None => Ok(out.column(0).to_vec()),
    }
}

pub fn log_density<P: Potential + ?Sized>(
    potential: &P,
    cfg: &FlowConfig,
    base: &BaseDensity,
    y: &[f64],
) -> Result<f64> {
    let row = ArrayView2::from_shape((1, y.len()), y).map_err(|e| Error::Argument(e.to_string()))?;
    log_density_rows(potential, cfg, base, row)[0].map_err(|step| Error::Divergence { step })
}

/// `log q_0(x(0)) - int_0^T laplacian(phi)(x(t)) dt` for each row, by backward RK4.
pub fn log_density_rows<P: Potential + ?Sized>(
    potential: &P,
    cfg: &FlowConfig,
    base: &BaseDensity,
    rows: ArrayView2<'_, f64>,
) -> Vec<std::result::Result<f64, usize>> {
    let mut out = Vec::with_capacity(rows.nrows());
    for chunk in rows.axis_chunks_iter(Axis(0), CHUNK) {
        let (x0, ell, div) = integrate_with_divergence(potential, cfg, chunk.t().to_owned());
        for col in 0..chunk.nrows() {
            out.push(match div[col] {
                Some(step) => Err(step),
                None => Ok(base.log_density(&x0.column(col).to_vec()) - ell[col]),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `phi = c |x|^2 / 2`: velocity `c x`, Laplacian `c d`.
    struct Quadratic {
        d: usize,
        c: f64,
    }

    impl Potential for Quadratic {
        fn dim(&self) -> usize {
            self.d
        }
        fn velocity(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
            x.mapv(|v| self.c * v)
        }
        fn field(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
            (self.velocity(x), Array1::from_elem(x.ncols(), self.c * self.d as f64))
        }
    }

    #[test]
    fn step_count_is_robust() {
        assert_eq!(FlowConfig::default().steps(), 20);
        assert_eq!(FlowConfig::new(0.3, 0.1).unwrap().steps(), 3);
        assert!(FlowConfig::new(0.01, 0.1).is_err());
        assert!(FlowConfig::new(0.2, 0.0).is_err());
    }

    #[test]
    fn quadratic_forward_and_inverse_match_exponential() {
        let q = Quadratic { d: 2, c: 1.0 };
        let cfg = FlowConfig::default();
        let x0 = [0.7, -1.3];
        let y = flow_forward(&q, &cfg, &x0).unwrap();
        let back = flow_inverse(&q, &cfg, &x0).unwrap();
        let e = 0.2f64.exp();
        for i in 0..2 {
            assert!((y[i] - x0[i] * e).abs() < 1e-8);
            assert!((back[i] - x0[i] / e).abs() < 1e-8);
        }
    }

    #[test]
    fn rk4_error_scales_as_fourth_power() {
        let q = Quadratic { d: 1, c: 3.0 };
        let exact = (3.0f64 * 1.2).exp();
        let errs: Vec<f64> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&tau| {
                let cfg = FlowConfig::new(1.2, tau).unwrap();
                (flow_forward(&q, &cfg, &[1.0]).unwrap()[0] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn quadratic_log_density_matches_gaussian_pushforward() {
        let q = Quadratic { d: 2, c: 1.0 };
        let cfg = FlowConfig::default();
        let base = BaseDensity::Gaussian { dim: 2 };
        let t = cfg.horizon;
        // x(T) = e^T x0, so q_T is N(0, e^{2T} I).
        let var = (2.0 * t).exp();
        for y in [[0.0, 0.0], [0.4, -1.1], [2.0, 1.5]] {
            let exact = -0.5 * (y[0] * y[0] + y[1] * y[1]) / var - (2.0 * std::f64::consts::PI * var).ln();
            assert_abs_diff_eq!(log_density(&q, &cfg, &base, &y).unwrap(), exact, epsilon = 1e-6);
        }
    }

    #[test]
    fn divergence_reports_step() {
        let q = Quadratic { d: 1, c: 1e308 };
        let cfg = FlowConfig::default();
        assert!(matches!(flow_forward(&q, &cfg, &[1.0]), Err(Error::Divergence { step: 0 })));
    }

    #[test]
    fn identity_model_is_exact() {
        let net = PotentialNet::identity(3, 8, 1).unwrap();
        let model = FlowModel::new(net, FlowConfig::default(), BaseDensity::Gaussian { dim: 3 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(model.forward(&x).unwrap(), x);
            assert_eq!(model.inverse(&x).unwrap(), x);
            assert_eq!(model.log_density(&x).unwrap(), model.base.log_density(&x));
        }
        let batch = ndarray::array![[0.0, 0.0, 0.0]];
        assert_abs_diff_eq!(model.nll(batch.view()).unwrap(), 1.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
    }
}
