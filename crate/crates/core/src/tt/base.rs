use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{FunctionalTT, SquaredTT, TtSampler};
use crate::error::Result;

/// Densities below this value, and everything outside the box, are treated as this value.
pub const LOG_FLOOR_EPS: f64 = 1e-12;

/// The initial density of a flow.
#[derive(Debug, Clone)]
pub enum BaseDensity {
    /// A functional TT with negative values clipped at the floor.
    Clipped(FunctionalTT),
    Squared(SquaredTT),
    Gaussian {
        dim: usize,
    },
}

impl BaseDensity {
    pub fn dim(&self) -> usize {
        match self {
            BaseDensity::Clipped(tt) => tt.dim(),
            BaseDensity::Squared(sq) => sq.dim(),
            BaseDensity::Gaussian { dim } => *dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BaseDensity::Clipped(_) => "clip",
            BaseDensity::Squared(_) => "born",
            BaseDensity::Gaussian { .. } => "gaussian",
        }
    }

    fn in_box(&self, x: &[f64]) -> bool {
        let iv = match self {
            BaseDensity::Clipped(tt) => tt.basis().interval(),
            BaseDensity::Squared(sq) => sq.basis().interval(),
            BaseDensity::Gaussian { .. } => return true,
        };
        x.iter().all(|v| iv.contains(*v))
    }

    /// `log(max(density, eps))`, with the density taken as `eps` outside the box.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            BaseDensity::Gaussian { dim } => gaussian_log(x, *dim),
            _ if !self.in_box(x) => LOG_FLOOR_EPS.ln(),
            BaseDensity::Clipped(tt) => tt.eval_unchecked(x).max(LOG_FLOOR_EPS).ln(),
            BaseDensity::Squared(sq) => sq.eval_unchecked(x).max(LOG_FLOOR_EPS).ln(),
        }
    }

    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        self.log_density_with_grad(x).1
    }

    /// Log-density and its gradient; the gradient is zero wherever the floor is active.
    pub fn log_density_with_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = x.len();
        match self {
            BaseDensity::Gaussian { dim } => (gaussian_log(x, *dim), x.iter().map(|v| -v).collect()),
            _ if !self.in_box(x) => (LOG_FLOOR_EPS.ln(), vec![0.0; d]),
            BaseDensity::Clipped(tt) => {
                let (p, g) = tt.eval_with_grad_unchecked(x);
                if p > LOG_FLOOR_EPS {
                    (p.ln(), g.into_iter().map(|v| v / p).collect())
                } else {
                    (LOG_FLOOR_EPS.ln(), vec![0.0; d])
                }
            }
            BaseDensity::Squared(sq) => {
                let (r, g) = sq.amplitude_with_grad_unchecked(x);
                let p = r * r;
                if p > LOG_FLOOR_EPS {
                    (p.ln(), g.into_iter().map(|v| 2.0 * v / r).collect())
                } else {
                    (LOG_FLOOR_EPS.ln(), vec![0.0; d])
                }
            }
        }
    }

    pub fn sampler(&self) -> Result<BaseSampler> {
        Ok(match self {
            BaseDensity::Clipped(tt) => BaseSampler::Tt(TtSampler::new(tt, super::DEFAULT_GRID)?),
            BaseDensity::Squared(sq) => BaseSampler::Tt(TtSampler::new(&sq.to_functional()?, super::DEFAULT_GRID)?),
            BaseDensity::Gaussian { dim } => BaseSampler::Gaussian { dim: *dim },
        })
    }
}

fn gaussian_log(x: &[f64], dim: usize) -> f64 {
    let sq: f64 = x.iter().map(|v| v * v).sum();
    -0.5 * sq - 0.5 * dim as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Precomputed sampling state for a base density.
#[derive(Debug, Clone)]
pub enum BaseSampler {
    Tt(TtSampler),
    Gaussian { dim: usize },
}

impl BaseSampler {
    /// `n` draws as rows and the count of draws that used the uniform fallback.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Array2<f64>, usize) {
        match self {
            BaseSampler::Tt(s) => s.sample(rng, n),
            BaseSampler::Gaussian { dim } => {
                (Array2::from_shape_simple_fn((n, *dim), || rng.sample(StandardNormal)), 0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{gauss_legendre, BasisSpec, Interval};
    use crate::tt::tests::random_tt;
    use approx::assert_abs_diff_eq;
    use ndarray::Array3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump_tt() -> FunctionalTT {
        // 3/4 (1 - t^2) in each of two coordinates.
        let basis = BasisSpec::new(3, Interval::unit()).unwrap();
        let f = vec![0.5 * 2f64.sqrt(), 0.0, -0.5 / 2.5f64.sqrt()];
        let c = Array3::from_shape_vec((1, 3, 1), f).unwrap();
        FunctionalTT::new(basis, vec![c.clone(), c]).unwrap()
    }

    #[test]
    fn clipped_log_above_and_below_floor() {
        let base = BaseDensity::Clipped(bump_tt());
        let p: f64 = 0.75 * 0.75;
        assert_abs_diff_eq!(base.log_density(&[0.0, 0.0]), p.ln(), epsilon = 1e-13);
        assert_eq!(base.log_density(&[1.0, 0.0]), LOG_FLOOR_EPS.ln());
        assert_eq!(base.log_density(&[2.0, 0.0]), LOG_FLOOR_EPS.ln());
        assert_eq!(base.grad_log_density(&[2.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn negative_values_hit_the_floor() {
        let basis = BasisSpec::new(1, Interval::unit()).unwrap();
        let tt = FunctionalTT::new(basis, vec![Array3::from_elem((1, 1, 1), -1.0), Array3::from_elem((1, 1, 1), 1.0)])
            .unwrap();
        let base = BaseDensity::Clipped(tt);
        assert_eq!(base.log_density(&[0.1, 0.2]), LOG_FLOOR_EPS.ln());
        assert_eq!(base.grad_log_density(&[0.1, 0.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn gaussian_peak_and_gradient() {
        let base = BaseDensity::Gaussian { dim: 2 };
        assert_abs_diff_eq!(base.log_density(&[0.0, 0.0]), -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
        assert_eq!(base.grad_log_density(&[0.5, -1.5]), vec![-0.5, 1.5]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sq = SquaredTT::new(random_tt(3, 4, 2, Interval::unit(), 41)).unwrap();
        let bases = [BaseDensity::Clipped(bump_tt()), BaseDensity::Squared(sq)];
        let points: [&[f64]; 2] = [&[0.3, -0.45], &[0.2, -0.3, 0.6]];
        for (base, x) in bases.iter().zip(points) {
            let g = base.grad_log_density(x);
            for k in 0..x.len() {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += 1e-6;
                xm[k] -= 1e-6;
                let fd = (base.log_density(&xp) - base.log_density(&xm)) / 2e-6;
                assert!((g[k] - fd).abs() < 1e-5 * (1.0 + fd.abs()), "{} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn bases_integrate_to_one_in_two_dimensions() {
        let rule = gauss_legendre(40, Interval::unit()).unwrap();
        let sq = SquaredTT::new(random_tt(2, 4, 2, Interval::unit(), 42)).unwrap();
        for base in [BaseDensity::Clipped(bump_tt()), BaseDensity::Squared(sq)] {
            let mut mass = 0.0;
            for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
                for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
                    mass += wx * wy * base.log_density(&[*x, *y]).exp();
                }
            }
            assert!((mass - 1.0).abs() < 1e-3, "{} mass {mass}", base.kind());
        }
    }

    #[test]
    fn mean_log_density_of_samples_matches_negative_entropy() {
        let base = BaseDensity::Clipped(bump_tt());
        let rule = gauss_legendre(60, Interval::unit()).unwrap();
        let mut neg_entropy = 0.0;
        for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
            for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
                let lp = base.log_density(&[*x, *y]);
                neg_entropy += wx * wy * lp.exp() * lp;
            }
        }
        let (xs, _) = base.sampler().unwrap().sample(&mut ChaCha8Rng::seed_from_u64(43), 10_000);
        let vals: Vec<f64> = xs.rows().into_iter().map(|r| base.log_density(&r.to_vec())).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - neg_entropy).abs() < 3.0 * (var / n).sqrt(), "{mean} vs {neg_entropy}");
    }
}
