use ndarray::{Array2, Array3, Array4, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{tt_inner, FunctionalTT, SquaredTT};
use crate::basis::gauss_legendre;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BornConfig {
    /// Amplitude ranks `s_1, ..., s_{d-1}`.
    pub ranks: Vec<usize>,
    pub steps: usize,
    pub seed: u64,
    /// Magnitude of the uniform perturbation added to the initial cores.
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct BornFit {
    pub squared: SquaredTT,
    /// `||p - r^2||^2` for the returned, norm-one amplitude.
    pub objective: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

/// Fits `r^2` to `p` in L2 by gradient descent with a backtracking line search.
pub fn born_fit(p: &FunctionalTT, cfg: &BornConfig) -> Result<BornFit> {
    let d = p.dim();
    if cfg.ranks.len() + 1 != d {
        return Err(Error::Argument(format!("need {} amplitude ranks, got {}", d - 1, cfg.ranks.len())));
    }
    if cfg.ranks.contains(&0) {
        return Err(Error::Argument("amplitude ranks must be positive".into()));
    }
    let problem = Problem::new(p)?;
    let mut cores = initial_cores(p, &cfg.ranks, cfg.noise, cfg.seed)?;

    let (mut f, mut grad) = problem.objective_and_grad(&cores);
    let mut trace = vec![f];
    if !f.is_finite() {
        return Err(Error::Fit { message: "initial objective is not finite".into(), trace });
    }
    let mut eta = 1.0;
    for _ in 0..cfg.steps {
        let g2: f64 = grad.iter().flat_map(|g| g.iter()).map(|v| v * v).sum();
        if !g2.is_finite() {
            return Err(Error::Fit { message: "gradient is not finite".into(), trace });
        }
        if g2 == 0.0 {
            break;
        }
        let mut accepted = false;
        while eta > 1e-30 {
            let trial: Vec<Array3<f64>> = cores.iter().zip(&grad).map(|(c, g)| c - &(g * eta)).collect();
            let ft = problem.objective(&trial);
            if ft.is_finite() && ft <= f - 1e-4 * eta * g2 {
                cores = trial;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        eta *= 2.0;
        (f, grad) = problem.objective_and_grad(&cores);
        if !f.is_finite() {
            return Err(Error::Fit { message: "objective became non-finite".into(), trace });
        }
        trace.push(f);
    }

    let amplitude = FunctionalTT::new(p.basis(), cores)?;
    let squared = SquaredTT::new(amplitude)?;
    let objective = problem.objective(squared.inner().cores());
    if !objective.is_finite() {
        return Err(Error::Fit { message: "final objective is not finite".into(), trace });
    }
    Ok(BornFit { squared, objective, trace })
}

/// `||p - r^2||^2` computed by exact tensor-network contraction.
pub fn born_objective(p: &FunctionalTT, amplitude: &FunctionalTT) -> Result<f64> {
    if amplitude.basis() != p.basis() || amplitude.dim() != p.dim() {
        return Err(Error::Configuration("amplitude and density use different bases".into()));
    }
    Ok(Problem::new(p)?.objective(amplitude.cores()))
}

/// Gauss nodes exact for the degree `4M - 4` integrands of the objective, with the
/// target's core matrices at every node.
struct Problem {
    weights: Vec<f64>,
    table: Array2<f64>,
    p_nodes: Vec<Vec<Array2<f64>>>,
    pp: f64,
}

impl Problem {
    fn new(p: &FunctionalTT) -> Result<Self> {
        let m = p.basis().size();
        let rule = gauss_legendre(2 * m - 1, p.basis().interval())?;
        let table = p.basis().table(&rule.nodes);
        let p_nodes = p.cores().iter().map(|c| node_matrices(c, &table)).collect();
        Ok(Self { weights: rule.weights, table, p_nodes, pp: tt_inner(p, p)? })
    }

    fn objective(&self, cores: &[Array3<f64>]) -> f64 {
        let mut e2 = Array3::<f64>::ones((1, 1, 1));
        let mut e4 = Array4::<f64>::ones((1, 1, 1, 1));
        for (k, core) in cores.iter().enumerate() {
            let h = node_matrices(core, &self.table);
            e2 = self.left2(&e2, k, &h);
            e4 = self.left4(&e4, &h);
        }
        self.pp - 2.0 * e2[[0, 0, 0]] + e4[[0, 0, 0, 0]]
    }

    fn objective_and_grad(&self, cores: &[Array3<f64>]) -> (f64, Vec<Array3<f64>>) {
        let d = cores.len();
        let h: Vec<Vec<Array2<f64>>> = cores.iter().map(|c| node_matrices(c, &self.table)).collect();
        let mut r2 = vec![Array3::<f64>::ones((1, 1, 1)); d + 1];
        let mut r4 = vec![Array4::<f64>::ones((1, 1, 1, 1)); d + 1];
        for k in (0..d).rev() {
            r2[k] = self.right2(&r2[k + 1], k, &h[k]);
            r4[k] = self.right4(&r4[k + 1], &h[k]);
        }
        let mut l2 = Array3::<f64>::ones((1, 1, 1));
        let mut l4 = Array4::<f64>::ones((1, 1, 1, 1));
        let mut grads = Vec::with_capacity(d);
        for k in 0..d {
            let (s0, m, s1) = cores[k].dim();
            let mut g = Array3::<f64>::zeros((s0, m, s1));
            for (q, &w) in self.weights.iter().enumerate() {
                let pq = &self.p_nodes[k][q];
                let hq = &h[k][q];
                // d<p, r^2>/dH_q, both H slots.
                let t = mode3(&mode3(&l2, 0, pq.view()), 2, hq.view());
                let rr = &r2[k + 1];
                let mut gq = Array2::<f64>::zeros((s0, s1));
                for ((beta, c, f), &tv) in t.indexed_iter() {
                    for gg in 0..s1 {
                        gq[[c, gg]] -= 4.0 * tv * rr[[beta, gg, f]];
                    }
                }
                // d<r^2, r^2>/dH_q, all four H slots.
                let t4 = mode4(&mode4(&mode4(&l4, 1, hq.view()), 2, hq.view()), 3, hq.view());
                let r = &r4[k + 1];
                for ((c1, g2, g3, g4), &tv) in t4.indexed_iter() {
                    for g1 in 0..s1 {
                        gq[[c1, g1]] += 4.0 * tv * r[[g1, g2, g3, g4]];
                    }
                }
                for c in 0..s0 {
                    for i in 0..m {
                        let wl = w * self.table[[q, i]];
                        for gg in 0..s1 {
                            g[[c, i, gg]] += wl * gq[[c, gg]];
                        }
                    }
                }
            }
            grads.push(g);
            l2 = self.left2(&l2, k, &h[k]);
            l4 = self.left4(&l4, &h[k]);
        }
        (self.pp - 2.0 * l2[[0, 0, 0]] + l4[[0, 0, 0, 0]], grads)
    }

    fn left2(&self, env: &Array3<f64>, k: usize, h: &[Array2<f64>]) -> Array3<f64> {
        let mut out: Option<Array3<f64>> = None;
        for (q, &w) in self.weights.iter().enumerate() {
            let p = &self.p_nodes[k][q];
            let t = mode3(&mode3(&mode3(env, 0, p.view()), 1, h[q].view()), 2, h[q].view()) * w;
            out = Some(match out {
                Some(acc) => acc + t,
                None => t,
            });
        }
        out.expect("at least one node")
    }

    fn right2(&self, env: &Array3<f64>, k: usize, h: &[Array2<f64>]) -> Array3<f64> {
        let mut out: Option<Array3<f64>> = None;
        for (q, &w) in self.weights.iter().enumerate() {
            let p = &self.p_nodes[k][q];
            let t = mode3(&mode3(&mode3(env, 0, p.t()), 1, h[q].t()), 2, h[q].t()) * w;
            out = Some(match out {
                Some(acc) => acc + t,
                None => t,
            });
        }
        out.expect("at least one node")
    }

    fn left4(&self, env: &Array4<f64>, h: &[Array2<f64>]) -> Array4<f64> {
        let mut out: Option<Array4<f64>> = None;
        for (q, &w) in self.weights.iter().enumerate() {
            let hv = h[q].view();
            let t = mode4(&mode4(&mode4(&mode4(env, 0, hv), 1, hv), 2, hv), 3, hv) * w;
            out = Some(match out {
                Some(acc) => acc + t,
                None => t,
            });
        }
        out.expect("at least one node")
    }

    fn right4(&self, env: &Array4<f64>, h: &[Array2<f64>]) -> Array4<f64> {
        let mut out: Option<Array4<f64>> = None;
        for (q, &w) in self.weights.iter().enumerate() {
            let ht = h[q].t();
            let t = mode4(&mode4(&mode4(&mode4(env, 0, ht), 1, ht), 2, ht), 3, ht) * w;
            out = Some(match out {
                Some(acc) => acc + t,
                None => t,
            });
        }
        out.expect("at least one node")
    }
}

/// `G(x_q)` for each quadrature node.
fn node_matrices(core: &Array3<f64>, table: &Array2<f64>) -> Vec<Array2<f64>> {
    let (r0, m, r1) = core.dim();
    (0..table.nrows())
        .map(|q| Array2::from_shape_fn((r0, r1), |(a, b)| (0..m).map(|i| core[[a, i, b]] * table[[q, i]]).sum()))
        .collect()
}

/// `out[.., g, ..] = sum_c t[.., c, ..] m[c, g]` along `axis`.
fn mode3(t: &Array3<f64>, axis: usize, m: ArrayView2<'_, f64>) -> Array3<f64> {
    let mut shape = [t.dim().0, t.dim().1, t.dim().2];
    shape[axis] = m.ncols();
    let mut out = Array3::<f64>::zeros(shape);
    for ((i0, i1, i2), &v) in t.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let mut idx = [i0, i1, i2];
        let c = idx[axis];
        for g in 0..m.ncols() {
            idx[axis] = g;
            out[idx] += v * m[[c, g]];
        }
    }
    out
}

fn mode4(t: &Array4<f64>, axis: usize, m: ArrayView2<'_, f64>) -> Array4<f64> {
    let (a, b, c, d) = t.dim();
    let mut shape = [a, b, c, d];
    shape[axis] = m.ncols();
    let mut out = Array4::<f64>::zeros(shape);
    for ((i0, i1, i2, i3), &v) in t.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let mut idx = [i0, i1, i2, i3];
        let c = idx[axis];
        for g in 0..m.ncols() {
            idx[axis] = g;
            out[idx] += v * m[[c, g]];
        }
    }
    out
}

/// Rank-one product of the square roots of the 1D marginals, plus seeded noise.
fn initial_cores(p: &FunctionalTT, ranks: &[usize], noise: f64, seed: u64) -> Result<Vec<Array3<f64>>> {
    let d = p.dim();
    let basis = p.basis();
    let m = basis.size();
    let w = basis.interval().constant_mass();
    let rule = gauss_legendre(2 * m, basis.interval())?;
    let table = basis.table(&rule.nodes);
    let rights = p.right_integrals();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left = vec![1.0];
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let core = &p.cores()[k];
        let marginal = super::conditional_coeffs(&left, core, &rights[k + 1]);
        let root: Vec<f64> = (0..rule.len())
            .map(|q| {
                let v: f64 = (0..m).map(|i| table[[q, i]] * marginal[i]).sum();
                v.max(0.0).sqrt()
            })
            .collect();
        let s0 = if k == 0 { 1 } else { ranks[k - 1] };
        let s1 = if k == d - 1 { 1 } else { ranks[k] };
        let mut h = Array3::from_shape_simple_fn((s0, m, s1), || noise * rng.random_range(-1.0..1.0));
        for i in 0..m {
            h[[0, i, 0]] += (0..rule.len()).map(|q| rule.weights[q] * table[[q, i]] * root[q]).sum::<f64>();
        }
        cores.push(h);
        let (r0, _, r1) = core.dim();
        left = (0..r1).map(|b| (0..r0).map(|a| left[a] * core[[a, 0, b]] * w).sum()).collect();
    }
    Ok(cores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSpec, Interval};
    use crate::tt::tests::random_tt;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_square_has_zero_objective() {
        let r0 = SquaredTT::new(random_tt(3, 3, 2, Interval::unit(), 61)).unwrap();
        let p = r0.to_functional().unwrap();
        // The amplitude must live in the density's basis; pad with zero coefficients.
        let m2 = p.basis().size();
        let padded: Vec<Array3<f64>> = r0
            .inner()
            .cores()
            .iter()
            .map(|c| {
                let (a, m, b) = c.dim();
                Array3::from_shape_fn((a, m2, b), |(x, i, y)| if i < m { c[[x, i, y]] } else { 0.0 })
            })
            .collect();
        let amp = FunctionalTT::new(p.basis(), padded).unwrap();
        assert_abs_diff_eq!(born_objective(&p, &amp).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_matches_quadrature() {
        let iv = Interval::new(-1.0, 2.0).unwrap();
        let p = random_tt(2, 4, 2, iv, 62);
        let amp = random_tt(2, 4, 3, iv, 63);
        let rule = gauss_legendre(12, iv).unwrap();
        let mut quad = 0.0;
        for (x, wx) in rule.nodes.iter().zip(&rule.weights) {
            for (y, wy) in rule.nodes.iter().zip(&rule.weights) {
                let r = amp.eval(&[*x, *y]).unwrap();
                let diff = p.eval(&[*x, *y]).unwrap() - r * r;
                quad += wx * wy * diff * diff;
            }
        }
        assert_abs_diff_eq!(born_objective(&p, &amp).unwrap(), quad, epsilon = 1e-9 * quad.max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let iv = Interval::unit();
        let p = random_tt(3, 3, 2, iv, 64);
        let amp = random_tt(3, 3, 2, iv, 65);
        let problem = Problem::new(&p).unwrap();
        let cores = amp.cores().to_vec();
        let (f, g) = problem.objective_and_grad(&cores);
        assert_abs_diff_eq!(f, problem.objective(&cores), epsilon = 1e-12);
        for (k, idx) in [(0, [0, 1, 1]), (1, [1, 2, 0]), (1, [0, 0, 1]), (2, [1, 1, 0])] {
            let mut plus = cores.clone();
            let mut minus = cores.clone();
            plus[k][idx] += 1e-6;
            minus[k][idx] -= 1e-6;
            let fd = (problem.objective(&plus) - problem.objective(&minus)) / 2e-6;
            assert!((g[k][idx] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{} vs {fd}", g[k][idx]);
        }
    }

    #[test]
    fn fit_descends_and_is_nonnegative() {
        let basis = BasisSpec::new(4, Interval::unit()).unwrap();
        let target = SquaredTT::new(random_tt(3, 2, 2, Interval::unit(), 66)).unwrap();
        let expanded = target.to_functional().unwrap();
        // Re-express the degree-2 density in a 4-term basis.
        let cores = expanded
            .cores()
            .iter()
            .map(|c| {
                let (a, _, b) = c.dim();
                Array3::from_shape_fn((a, 4, b), |(x, i, y)| if i < 3 { c[[x, i, y]] } else { 0.0 })
            })
            .collect();
        let p = FunctionalTT::new(basis, cores).unwrap();
        let cfg = BornConfig { ranks: vec![2, 2], steps: 200, seed: 7, noise: 1e-2 };
        let fit = born_fit(&p, &cfg).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(fit.trace.last().unwrap() < &fit.trace[0]);
        assert_abs_diff_eq!(fit.squared.frobenius_norm(), 1.0, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(fit.squared.eval(&x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn rank_count_is_checked() {
        let p = random_tt(3, 3, 2, Interval::unit(), 68);
        let cfg = BornConfig { ranks: vec![2], steps: 1, seed: 0, noise: 0.0 };
        assert!(born_fit(&p, &cfg).is_err());
    }
}
