//! The potential `phi(x) = w3 . softplus(W2 logcosh(W1 x + b1) + b2) + b3`.
//!
//! Batches are `d x B` matrices with one sample per column. Besides the velocity
//! `grad phi` and the Laplacian, the batched forward pass keeps what the reverse
//! pass needs to pull cotangents of both back onto the parameters and the input.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const ACTIVATIONS: [&str; 3] = ["logcosh", "softplus", "linear"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    d: usize,
    width: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.width * self.d
    }
    fn w2(&self) -> usize {
        self.b1() + self.width
    }
    fn b2(&self) -> usize {
        self.w2() + self.width * self.width
    }
    fn w3(&self) -> usize {
        self.b2() + self.width
    }
    fn b3(&self) -> usize {
        self.w3() + self.width
    }
    fn len(&self) -> usize {
        self.b3() + 1
    }
}

/// Two hidden layers of equal width; parameters stored flat in the order
/// `W1 (D x d), b1, W2 (D x D), b2, w3, b3`, matrices row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialNet {
    layout: Layout,
    theta: Vec<f64>,
}

impl PotentialNet {
    pub fn zeros(d: usize, width: usize) -> Result<Self> {
        if d == 0 || width == 0 {
            return Err(Error::Argument(format!("network needs d > 0 and D > 0, got {d} and {width}")));
        }
        let layout = Layout { d, width };
        Ok(Self { layout, theta: vec![0.0; layout.len()] })
    }

    pub fn from_theta(d: usize, width: usize, theta: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(d, width)?;
        if theta.len() != net.theta.len() {
            return Err(Error::Argument(format!("expected {} parameters, got {}", net.theta.len(), theta.len())));
        }
        net.theta = theta;
        Ok(net)
    }

    /// Hidden layers drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; output
    /// layer zero, so the potential is constant and the flow is the identity.
    pub fn identity(d: usize, width: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(d, width)?;
        net.init_identity(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok(net)
    }

    pub fn init_identity<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let l = self.layout;
        let s1 = 1.0 / (l.d as f64).sqrt();
        let s2 = 1.0 / (l.width as f64).sqrt();
        for v in &mut self.theta[l.w1()..l.w2()] {
            *v = rng.random_range(-s1..s1);
        }
        for v in &mut self.theta[l.w2()..l.w3()] {
            *v = rng.random_range(-s2..s2);
        }
        for v in &mut self.theta[l.w3()..] {
            *v = 0.0;
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.d
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Index of the output bias in the flat parameter vector.
    pub fn output_bias_index(&self) -> usize {
        self.layout.b3()
    }

    /// Index range of the output weights `w3`.
    pub fn output_weight_range(&self) -> std::ops::Range<usize> {
        self.layout.w3()..self.layout.b3()
    }

    pub fn w1(&self) -> ArrayView2<'_, f64> {
        let l = self.layout;
        ArrayView2::from_shape((l.width, l.d), &self.theta[l.w1()..l.b1()]).expect("layout")
    }

    pub fn b1(&self) -> ArrayView1<'_, f64> {
        let l = self.layout;
        ArrayView1::from(&self.theta[l.b1()..l.w2()])
    }

    pub fn w2(&self) -> ArrayView2<'_, f64> {
        let l = self.layout;
        ArrayView2::from_shape((l.width, l.width), &self.theta[l.w2()..l.b2()]).expect("layout")
    }

    pub fn b2(&self) -> ArrayView1<'_, f64> {
        let l = self.layout;
        ArrayView1::from(&self.theta[l.b2()..l.w3()])
    }

    pub fn w3(&self) -> ArrayView1<'_, f64> {
        let l = self.layout;
        ArrayView1::from(&self.theta[l.w3()..l.b3()])
    }

    pub fn b3(&self) -> f64 {
        self.theta[self.layout.b3()]
    }

    fn column(x: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((x.len(), 1), x.to_vec()).expect("column")
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        let xm = Self::column(x);
        let z1 = self.w1().dot(&xm) + self.b1().insert_axis(Axis(1));
        let a1 = z1.mapv(logcosh);
        let z2 = self.w2().dot(&a1) + self.b2().insert_axis(Axis(1));
        z2.column(0).iter().zip(self.w3()).map(|(z, w)| w * softplus(*z)).sum::<f64>() + self.b3()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.velocity_batch(Self::column(x).view()).column(0).to_vec()
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.field_batch(Self::column(x).view()).1[0]
    }

    /// Velocities `grad phi` at the columns of `x`.
    pub fn velocity_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let h = self.hidden(x);
        self.w1().t().dot(&h.u1)
    }

    /// Velocities and Laplacians at the columns of `x`.
    pub fn field_batch(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>) {
        let (v, lap, _) = self.stage_forward(x);
        (v, lap)
    }

    fn hidden(&self, x: ArrayView2<'_, f64>) -> Hidden {
        let z1 = self.w1().dot(&x) + self.b1().insert_axis(Axis(1));
        let a1 = z1.mapv(logcosh);
        let t1 = z1.mapv(f64::tanh);
        let z2 = self.w2().dot(&a1) + self.b2().insert_axis(Axis(1));
        let s2 = z2.mapv(sigmoid);
        let u2 = &s2 * &self.w3().insert_axis(Axis(1));
        let g1 = self.w2().t().dot(&u2);
        let u1 = &t1 * &g1;
        Hidden { a1, t1, s2, u2, g1, u1 }
    }

    /// `K = [diag(t_1) W1, ..., diag(t_B) W1]`, a `D x dB` matrix.
    fn stacked_k(&self, t1: &Array2<f64>) -> Array2<f64> {
        let (width, b) = t1.dim();
        let d = self.layout.d;
        let w1 = self.w1();
        let mut k = Array2::<f64>::zeros((width, d * b));
        for j in 0..width {
            let row = w1.row(j);
            let mut out = k.row_mut(j);
            let out = out.as_slice_mut().expect("standard layout");
            for col in 0..b {
                let t = t1[[j, col]];
                for (o, w) in out[col * d..(col + 1) * d].iter_mut().zip(row.iter()) {
                    *o = t * w;
                }
            }
        }
        k
    }

    pub(crate) fn stage_forward(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, Array1<f64>, StageCache) {
        let d = self.layout.d;
        let b = x.ncols();
        let h = self.hidden(x);
        let v = self.w1().t().dot(&h.u1);
        let c1 = h.t1.mapv(|t| 1.0 - t * t);
        let c2 = h.s2.mapv(|s| s * (1.0 - s));
        let norms: Array1<f64> = self.w1().rows().into_iter().map(|r| r.dot(&r)).collect();
        let j = self.w2().dot(&self.stacked_k(&h.t1));
        let width = self.layout.width;
        let mut q = Array2::<f64>::zeros((width, b));
        for m in 0..width {
            let row = j.row(m);
            let row = row.as_slice().expect("standard layout");
            for col in 0..b {
                q[[m, col]] = row[col * d..(col + 1) * d].iter().map(|v| v * v).sum();
            }
        }
        let w3 = self.w3();
        let mut lap = Array1::<f64>::zeros(b);
        for col in 0..b {
            let mut acc = 0.0;
            for jj in 0..width {
                acc += c1[[jj, col]] * h.g1[[jj, col]] * norms[jj] + c2[[jj, col]] * w3[jj] * q[[jj, col]];
            }
            lap[col] = acc;
        }
        let cache = StageCache {
            x: x.to_owned(),
            a1: h.a1,
            t1: h.t1,
            c1,
            g1: h.g1,
            u1: h.u1,
            s2: h.s2,
            u2: h.u2,
            c2,
            q,
            j,
            norms,
        };
        (v, lap, cache)
    }

    /// Pulls cotangents of the velocities (`d x B`) and Laplacians (`B`) back to the
    /// parameters (accumulated into `grad`) and returns the cotangent of the input.
    pub(crate) fn stage_backward(
        &self,
        cache: &StageCache,
        vbar: ArrayView2<'_, f64>,
        lbar: ArrayView1<'_, f64>,
        grad: &mut ParamGrad,
    ) -> Array2<f64> {
        let d = self.layout.d;
        let width = self.layout.width;
        let b = vbar.ncols();
        let w1 = self.w1();
        let w2 = self.w2();
        let w3 = self.w3();

        // v = W1^T u1
        let u1bar = w1.dot(&vbar);
        grad.w1 += &cache.u1.dot(&vbar.t());

        // Laplacian: sum_j c1 g1 n_j + sum_m c2 w3 q
        let mut c1bar = Array2::<f64>::zeros((width, b));
        let mut g1bar = Array2::<f64>::zeros((width, b));
        let mut c2bar = Array2::<f64>::zeros((width, b));
        let mut qbar = Array2::<f64>::zeros((width, b));
        let mut nbar = Array1::<f64>::zeros(width);
        for jj in 0..width {
            let n = cache.norms[jj];
            let w = w3[jj];
            let mut w3acc = 0.0;
            let mut nacc = 0.0;
            for col in 0..b {
                let l = lbar[col];
                let c1 = cache.c1[[jj, col]];
                let g1 = cache.g1[[jj, col]];
                let c2 = cache.c2[[jj, col]];
                let q = cache.q[[jj, col]];
                c1bar[[jj, col]] = l * g1 * n;
                g1bar[[jj, col]] = l * c1 * n;
                nacc += l * c1 * g1;
                c2bar[[jj, col]] = l * w * q;
                w3acc += l * c2 * q;
                qbar[[jj, col]] = l * c2 * w;
            }
            grad.w3[jj] += w3acc;
            nbar[jj] = nacc;
        }
        for (mut row, (&nb, wrow)) in grad.w1.rows_mut().into_iter().zip(nbar.iter().zip(w1.rows())) {
            row.scaled_add(2.0 * nb, &wrow);
        }

        // q_m = ||J_m||^2 per sample, J = W2 K.
        let mut jbar = cache.j.clone();
        for m in 0..width {
            let mut row = jbar.row_mut(m);
            let row = row.as_slice_mut().expect("standard layout");
            for col in 0..b {
                let s = 2.0 * qbar[[m, col]];
                for v in &mut row[col * d..(col + 1) * d] {
                    *v *= s;
                }
            }
        }
        let k = self.stacked_k(&cache.t1);
        grad.w2 += &jbar.dot(&k.t());
        let kbar = w2.t().dot(&jbar);
        let mut t1bar = Array2::<f64>::zeros((width, b));
        for jj in 0..width {
            let wrow = w1.row(jj);
            let krow = kbar.row(jj);
            let krow = krow.as_slice().expect("standard layout");
            let mut gw = grad.w1.row_mut(jj);
            for col in 0..b {
                let seg = &krow[col * d..(col + 1) * d];
                t1bar[[jj, col]] = seg.iter().zip(wrow.iter()).map(|(a, w)| a * w).sum();
                let t = cache.t1[[jj, col]];
                for (g, s) in gw.iter_mut().zip(seg) {
                    *g += t * s;
                }
            }
        }

        // u1 = t1 * g1
        t1bar += &(&u1bar * &cache.g1);
        g1bar += &(&u1bar * &cache.t1);

        // g1 = W2^T u2, u2 = s2 * w3
        grad.w2 += &cache.u2.dot(&g1bar.t());
        let u2bar = w2.dot(&g1bar);
        let s2bar = &u2bar * &w3.insert_axis(Axis(1));
        grad.w3 += &(&u2bar * &cache.s2).sum_axis(Axis(1));

        // s2 = sigmoid(z2), c2 = s2 (1 - s2)
        let mut z2bar = Array2::<f64>::zeros((width, b));
        for ((z, &s), ((&sb, &cb), &c2)) in
            z2bar.iter_mut().zip(cache.s2.iter()).zip(s2bar.iter().zip(c2bar.iter()).zip(cache.c2.iter()))
        {
            *z = sb * c2 + cb * c2 * (1.0 - 2.0 * s);
        }

        // z2 = W2 a1 + b2
        grad.w2 += &z2bar.dot(&cache.a1.t());
        grad.b2 += &z2bar.sum_axis(Axis(1));
        let a1bar = w2.t().dot(&z2bar);

        // a1 = logcosh(z1), t1 = tanh(z1), c1 = 1 - t1^2
        let mut z1bar = Array2::<f64>::zeros((width, b));
        for (((z, &ab), (&tb, &cb)), (&t, &c1)) in z1bar
            .iter_mut()
            .zip(a1bar.iter())
            .zip(t1bar.iter().zip(c1bar.iter()))
            .zip(cache.t1.iter().zip(cache.c1.iter()))
        {
            *z = ab * t + tb * c1 - 2.0 * cb * t * c1;
        }

        // z1 = W1 x + b1
        grad.w1 += &z1bar.dot(&cache.x.t());
        grad.b1 += &z1bar.sum_axis(Axis(1));
        w1.t().dot(&z1bar)
    }
}

struct Hidden {
    a1: Array2<f64>,
    t1: Array2<f64>,
    s2: Array2<f64>,
    u2: Array2<f64>,
    g1: Array2<f64>,
    u1: Array2<f64>,
}

/// Intermediates of one batched field evaluation.
#[derive(Debug, Clone)]
pub(crate) struct StageCache {
    x: Array2<f64>,
    a1: Array2<f64>,
    t1: Array2<f64>,
    c1: Array2<f64>,
    g1: Array2<f64>,
    u1: Array2<f64>,
    s2: Array2<f64>,
    u2: Array2<f64>,
    c2: Array2<f64>,
    q: Array2<f64>,
    j: Array2<f64>,
    norms: Array1<f64>,
}

/// Parameter gradient in the network's block structure.
#[derive(Debug, Clone)]
pub(crate) struct ParamGrad {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array1<f64>,
}

impl ParamGrad {
    pub fn zeros(net: &PotentialNet) -> Self {
        let (d, w) = (net.dim(), net.width());
        Self {
            w1: Array2::zeros((w, d)),
            b1: Array1::zeros(w),
            w2: Array2::zeros((w, w)),
            b2: Array1::zeros(w),
            w3: Array1::zeros(w),
        }
    }

    /// Adds `scale` times this gradient into a flat parameter-shaped vector.
    pub fn add_to_flat(&self, flat: &mut [f64], scale: f64) {
        let parts: [&[f64]; 5] = [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
        ];
        let mut offset = 0;
        for part in parts {
            for (f, g) in flat[offset..offset + part.len()].iter_mut().zip(part) {
                *f += scale * g;
            }
            offset += part.len();
        }
    }
}

pub(crate) fn logcosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_net(d: usize, width: usize, seed: u64, out_scale: f64) -> PotentialNet {
        let mut net = PotentialNet::identity(d, width, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        for i in net.output_weight_range() {
            net.theta[i] = out_scale * rng.random_range(-1.0..1.0);
        }
        let b3 = net.output_bias_index();
        net.theta[b3] = 0.3;
        net
    }

    /// Straight-line evaluation with explicit loops.
    fn phi_reference(net: &PotentialNet, x: &[f64]) -> f64 {
        let (d, w) = (net.dim(), net.width());
        let h1: Vec<f64> = (0..w)
            .map(|j| {
                let z: f64 = (0..d).map(|i| net.w1()[[j, i]] * x[i]).sum::<f64>() + net.b1()[j];
                z.cosh().ln()
            })
            .collect();
        let mut out = net.b3();
        for m in 0..w {
            let z: f64 = (0..w).map(|j| net.w2()[[m, j]] * h1[j]).sum::<f64>() + net.b2()[m];
            out += net.w3()[m] * (1.0 + z.exp()).ln();
        }
        out
    }

    fn sample_points(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn zero_output_layer_is_constant() {
        let mut net = PotentialNet::identity(3, 8, 1).unwrap();
        let b3 = net.output_bias_index();
        net.theta_mut()[b3] = 1.25;
        for x in sample_points(3, 5, 2) {
            assert_eq!(net.phi(&x), 1.25);
            assert_eq!(net.grad(&x), vec![0.0; 3]);
            assert_eq!(net.laplacian(&x), 0.0);
        }
    }

    #[test]
    fn phi_matches_reference() {
        let net = random_net(3, 7, 3, 0.5);
        for x in sample_points(3, 10, 4) {
            assert_abs_diff_eq!(net.phi(&x), phi_reference(&net, &x), epsilon = 1e-12);
        }
    }

    #[test]
    fn first_layer_sign_flip_preserves_phi() {
        let net = random_net(3, 6, 5, 0.5);
        let mut flipped = net.clone();
        let l = net.layout;
        for v in &mut flipped.theta[l.w1()..l.w2()] {
            *v = -*v;
        }
        for x in sample_points(3, 5, 6) {
            assert_abs_diff_eq!(net.phi(&x), flipped.phi(&x), epsilon = 1e-13);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let net = random_net(4, 9, 7, 0.7);
        for x in sample_points(4, 5, 8) {
            let g = net.grad(&x);
            for k in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += 1e-5;
                xm[k] -= 1e-5;
                let fd = (net.phi(&xp) - net.phi(&xm)) / 2e-5;
                assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1e-3), "{} vs {fd}", g[k]);
            }
        }
    }

    #[test]
    fn additive_constant_leaves_gradient() {
        let net = random_net(3, 5, 9, 0.5);
        let mut shifted = net.clone();
        let b3 = net.output_bias_index();
        shifted.theta[b3] += 4.0;
        let x = [0.3, -0.1, 0.8];
        assert_eq!(net.grad(&x), shifted.grad(&x));
    }

    #[test]
    fn laplacian_matches_finite_difference_hessian() {
        let net = random_net(4, 10, 10, 0.8);
        let h = 1e-4;
        for x in sample_points(4, 5, 11) {
            let f0 = net.phi(&x);
            let mut trace = 0.0;
            for k in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                trace += (net.phi(&xp) - 2.0 * f0 + net.phi(&xm)) / (h * h);
            }
            let lap = net.laplacian(&x);
            assert!((lap - trace).abs() <= 1e-4 * lap.abs().max(1e-2), "{lap} vs {trace}");
        }
    }

    #[test]
    fn laplacian_is_permutation_invariant_for_tied_weights() {
        // Every hidden unit sees the sum of the inputs, so phi is symmetric.
        let mut net = random_net(3, 4, 12, 0.5);
        let l = net.layout;
        for j in 0..4 {
            let w = net.theta[l.w1() + j * 3];
            for i in 0..3 {
                net.theta[l.w1() + j * 3 + i] = w;
            }
        }
        let a = net.laplacian(&[0.1, 0.5, -0.7]);
        let b = net.laplacian(&[-0.7, 0.1, 0.5]);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn identity_init_is_deterministic() {
        let a = PotentialNet::identity(4, 16, 3).unwrap();
        let b = PotentialNet::identity(4, 16, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.theta[..a.output_weight_range().start].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn batch_matches_pointwise() {
        let net = random_net(3, 6, 13, 0.5);
        let pts = sample_points(3, 4, 14);
        let x = Array2::from_shape_fn((3, 4), |(i, b)| pts[b][i]);
        let (v, lap) = net.field_batch(x.view());
        for (b, p) in pts.iter().enumerate() {
            let g = net.grad(p);
            for i in 0..3 {
                assert_abs_diff_eq!(v[[i, b]], g[i], epsilon = 1e-14);
            }
            assert_abs_diff_eq!(lap[b], net.laplacian(p), epsilon = 1e-13);
        }
    }

    /// Checks the reverse pass against finite differences of the scalar
    /// `sum(vbar . v) + sum(lbar * lap)`, for both parameters and inputs.
    #[test]
    fn stage_backward_matches_finite_differences() {
        let net = random_net(3, 5, 15, 0.6);
        let pts = sample_points(3, 2, 16);
        let x = Array2::from_shape_fn((3, 2), |(i, b)| pts[b][i]);
        let vbar = Array2::from_shape_fn((3, 2), |(i, b)| 0.3 * i as f64 - 0.2 * b as f64 + 0.1);
        let lbar = Array1::from(vec![0.7, -0.4]);
        let scalar = |n: &PotentialNet, x: &Array2<f64>| {
            let (v, lap) = n.field_batch(x.view());
            (&v * &vbar).sum() + (&lap * &lbar).sum()
        };
        let (_, _, cache) = net.stage_forward(x.view());
        let mut pg = ParamGrad::zeros(&net);
        let xbar = net.stage_backward(&cache, vbar.view(), lbar.view(), &mut pg);
        let mut flat = vec![0.0; net.n_params()];
        pg.add_to_flat(&mut flat, 1.0);
        let h = 1e-6;
        for (p, &g) in flat.iter().enumerate() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            plus.theta[p] += h;
            minus.theta[p] -= h;
            let fd = (scalar(&plus, &x) - scalar(&minus, &x)) / (2.0 * h);
            assert!((g - fd).abs() < 1e-6 * (1.0 + fd.abs()), "param {p}: {g} vs {fd}");
        }
        for i in 0..3 {
            for b in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[[i, b]] += h;
                xm[[i, b]] -= h;
                let fd = (scalar(&net, &xp) - scalar(&net, &xm)) / (2.0 * h);
                assert!((xbar[[i, b]] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}
