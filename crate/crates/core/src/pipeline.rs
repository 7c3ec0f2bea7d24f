//! Samples to a normalized functional TT: KDE marginals, sketched core equations, assembly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{gauss_legendre, BasisSpec};
use crate::cde::{assemble_tt, sketch_from_coeffs, solve_cores, RankSelection};
use crate::error::{Error, Result};
use crate::marginal::{project_kde, slice_marginal, MarginalKDE};
use crate::samples::SampleSet;
use crate::tt::FunctionalTT;

/// Internal ranks: one rule for every bond, or an explicit list `r_1, ..., r_{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankPlan {
    PerBond(Vec<usize>),
    Uniform(RankSelection),
}

impl Default for RankPlan {
    fn default() -> Self {
        RankPlan::Uniform(RankSelection::Fixed(2))
    }
}

impl RankPlan {
    fn for_bond(&self, k: usize) -> RankSelection {
        match self {
            RankPlan::PerBond(r) => RankSelection::Fixed(r[k - 1]),
            RankPlan::Uniform(sel) => *sel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtBuildConfig {
    pub basis_size: usize,
    pub quadrature: usize,
    pub ranks: RankPlan,
    /// Shared KDE bandwidth; when absent each marginal gets the default rule.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub bandwidths: Vec<f64>,
    /// Singular values of unfoldings `1..d-1`.
    pub singular_values: Vec<Vec<f64>>,
    pub ranks: Vec<usize>,
    /// Least-squares residuals of the core equations `2..=d`.
    pub cde_residuals: Vec<f64>,
    pub rhs_norms: Vec<f64>,
}

pub fn estimate_tt(samples: &SampleSet, cfg: &TtBuildConfig) -> Result<(FunctionalTT, BuildDiagnostics)> {
    let d = samples.dim();
    if let RankPlan::PerBond(r) = &cfg.ranks {
        if r.len() + 1 != d {
            return Err(Error::Argument(format!("need {} ranks, got {}", d - 1, r.len())));
        }
    }
    let interval = samples.interval();
    let basis = BasisSpec::new(cfg.basis_size, interval)?;
    let quad = gauss_legendre(cfg.quadrature, interval)?;

    let mut bandwidths = Vec::with_capacity(d);
    let mut sketches = Vec::with_capacity(d);
    for k in 1..=d {
        let coeffs = (|| {
            let slice = slice_marginal(samples, k)?;
            let kde = match cfg.bandwidth {
                Some(h) => MarginalKDE::new(slice, h)?,
                None => MarginalKDE::with_default_bandwidth(slice)?,
            };
            bandwidths.push(kde.bandwidth());
            project_kde(&kde, &basis, &quad)
        })()
        .map_err(|e| e.in_stage("marginal-estimation"))?;
        let sel = if k == d { RankSelection::Fixed(1) } else { cfg.ranks.for_bond(k) };
        sketches.push(sketch_from_coeffs(&coeffs, d, sel, interval).map_err(|e| e.in_stage("cde-solver"))?);
    }
    let solution = solve_cores(&sketches).map_err(|e| e.in_stage("cde-solver"))?;
    let tt = assemble_tt(&solution.cores, basis).map_err(|e| e.in_stage("tt-density"))?;
    let diagnostics = BuildDiagnostics {
        bandwidths,
        singular_values: sketches[..d - 1].iter().map(|s| s.singular_values.clone()).collect(),
        ranks: sketches[..d - 1].iter().map(|s| s.rank).collect(),
        cde_residuals: solution.residuals,
        rhs_norms: solution.rhs_norms,
    };
    Ok((tt, diagnostics))
}

/// Monte-Carlo estimate of `∫ max(-p, 0) / ∫ |p|` with uniform points in the box.
pub fn negative_mass_fraction<R: Rng + ?Sized>(tt: &FunctionalTT, rng: &mut R, n: usize) -> f64 {
    let iv = tt.basis().interval();
    let d = tt.dim();
    let mut x = vec![0.0; d];
    let (mut neg, mut abs) = (0.0, 0.0);
    for _ in 0..n {
        for v in x.iter_mut() {
            *v = rng.random_range(iv.lower()..iv.upper());
        }
        let p = tt.eval(&x).unwrap_or(0.0);
        abs += p.abs();
        if p < 0.0 {
            neg -= p;
        }
    }
    if abs == 0.0 {
        0.0
    } else {
        neg / abs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Interval;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn independent_samples(n: usize, d: usize, seed: u64) -> SampleSet {
        // Coordinates iid with density (1 + x) / 2 on [-1, 1].
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_simple_fn((n, d), || 2.0 * rng.random::<f64>().sqrt() - 1.0);
        SampleSet::new(data, Interval::new(-1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn pipeline_output_is_normalized_with_one_spectrum_per_unfolding() {
        let set = independent_samples(4000, 4, 1);
        let cfg = TtBuildConfig { basis_size: 6, quadrature: 20, ranks: RankPlan::default(), bandwidth: None };
        let (tt, diag) = estimate_tt(&set, &cfg).unwrap();
        assert!((tt.integral() - 1.0).abs() < 1e-8);
        assert_eq!(diag.singular_values.len(), 3);
        assert_eq!(diag.cde_residuals.len(), 3);
        assert_eq!(diag.bandwidths.len(), 4);
    }

    #[test]
    fn rank_one_data_has_little_negative_mass() {
        let set = independent_samples(100_000, 3, 2);
        let cfg =
            TtBuildConfig { basis_size: 8, quadrature: 20, ranks: RankPlan::PerBond(vec![1, 1]), bandwidth: None };
        let (tt, _) = estimate_tt(&set, &cfg).unwrap();
        let frac = negative_mass_fraction(&tt, &mut ChaCha8Rng::seed_from_u64(3), 100_000);
        assert!(frac < 0.05, "negative mass fraction {frac}");
    }

    #[test]
    fn stage_is_attached_to_errors() {
        let set = independent_samples(100, 3, 4);
        let cfg = TtBuildConfig { basis_size: 4, quadrature: 8, ranks: RankPlan::default(), bandwidth: Some(-1.0) };
        match estimate_tt(&set, &cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "marginal-estimation"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = TtBuildConfig { basis_size: 4, quadrature: 8, ranks: RankPlan::PerBond(vec![9, 9]), bandwidth: None };
        match estimate_tt(&set, &cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "cde-solver"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rank_plan_parses_both_forms() {
        let a: RankPlan = serde_json::from_str("[2, 3]").unwrap();
        assert_eq!(a, RankPlan::PerBond(vec![2, 3]));
        let b: RankPlan = serde_json::from_str(r#"{"threshold": 0.01}"#).unwrap();
        assert_eq!(b, RankPlan::Uniform(RankSelection::Threshold(0.01)));
    }
}
