//! Orthonormal shifted Legendre polynomials and Gauss-Legendre quadrature on `[a, b]`.
//!
//! `L_1` is the constant `1/sqrt(b-a)` and `deg(L_i) = i - 1`. Index `i` of every
//! returned vector corresponds to `L_{i+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Argument(format!("invalid interval [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    /// The reference interval `[-1, 1]`.
    pub fn unit() -> Self {
        Self { a: -1.0, b: 1.0 }
    }

    pub fn lower(&self) -> f64 {
        self.a
    }

    pub fn upper(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// Affine map of `x` onto `[-1, 1]`.
    pub fn to_reference(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    /// Affine map of `t` in `[-1, 1]` back onto this interval.
    pub fn from_reference(&self, t: f64) -> f64 {
        self.midpoint() + 0.5 * self.width() * t
    }

    /// `∫ L_1 = sqrt(b - a)`, the integral of the constant basis function.
    pub fn constant_mass(&self) -> f64 {
        self.width().sqrt()
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.a, i.b]
    }
}

/// The first `m` orthonormal Legendre polynomials on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    m: usize,
    interval: Interval,
}

impl BasisSpec {
    pub fn new(m: usize, interval: Interval) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("basis size must be at least 1".into()));
        }
        Ok(Self { m, interval })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.interval.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("x = {x} outside [{}, {}]", self.interval.a, self.interval.b)))
        }
    }

    /// `[L_1(x), ..., L_M(x)]`.
    pub fn eval(&self, x: f64) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; self.m];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// `[L_1'(x), ..., L_M'(x)]`.
    pub fn deriv(&self, x: f64) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut vals = vec![0.0; self.m];
        let mut ders = vec![0.0; self.m];
        self.eval_with_deriv_into(x, &mut vals, &mut ders);
        Ok(ders)
    }

    /// Unchecked evaluation; `out.len()` must equal the basis size. Values outside
    /// the interval are the polynomial extension.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        let t = self.interval.to_reference(x);
        let w = self.interval.width();
        let mut p_prev = 0.0;
        let mut p = 1.0;
        for (n, slot) in out.iter_mut().enumerate() {
            let nf = n as f64;
            *slot = ((2.0 * nf + 1.0) / w).sqrt() * p;
            let p_next = ((2.0 * nf + 1.0) * t * p - nf * p_prev) / (nf + 1.0);
            p_prev = p;
            p = p_next;
        }
    }

    /// Unchecked values and derivatives in one recurrence sweep.
    pub fn eval_with_deriv_into(&self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        debug_assert_eq!(vals.len(), self.m);
        debug_assert_eq!(ders.len(), self.m);
        let t = self.interval.to_reference(x);
        let w = self.interval.width();
        let dt_dx = 2.0 / w;
        let (mut p_prev, mut p) = (0.0, 1.0);
        let mut dp = 0.0;
        for n in 0..self.m {
            let nf = n as f64;
            let scale = ((2.0 * nf + 1.0) / w).sqrt();
            vals[n] = scale * p;
            ders[n] = scale * dp * dt_dx;
            let p_next = ((2.0 * nf + 1.0) * t * p - nf * p_prev) / (nf + 1.0);
            // P'_{n+1} = (n+1) P_n + t P'_n
            let dp_next = (nf + 1.0) * p + t * dp;
            p_prev = p;
            p = p_next;
            dp = dp_next;
        }
    }

    /// Evaluates the basis at every point, returning a `points.len() x M` row-major table.
    pub fn table(&self, points: &[f64]) -> ndarray::Array2<f64> {
        let mut out = ndarray::Array2::zeros((points.len(), self.m));
        for (row, &x) in out.rows_mut().into_iter().zip(points) {
            let slice = row.into_slice().expect("rows of a standard-layout array are contiguous");
            self.eval_into(x, slice);
        }
        out
    }
}

/// Nodes and positive weights of a Gauss-Legendre rule on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    interval: Interval,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// The `l`-point Gauss-Legendre rule mapped onto `interval`, nodes ascending.
pub fn gauss_legendre(l: usize, interval: Interval) -> Result<QuadratureRule> {
    if l == 0 {
        return Err(Error::Argument("quadrature needs at least one node".into()));
    }
    let mut ref_nodes = vec![0.0; l];
    let mut ref_weights = vec![0.0; l];
    let n = l as f64;
    // Roots come in ± pairs; solve for the upper half with Newton on P_l.
    for i in 0..l.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_deriv(l, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_deriv(l, t);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        ref_nodes[i] = -t;
        ref_weights[i] = w;
        ref_nodes[l - 1 - i] = t;
        ref_weights[l - 1 - i] = w;
    }
    if l % 2 == 1 {
        ref_nodes[l / 2] = 0.0;
    }
    let half = 0.5 * interval.width();
    Ok(QuadratureRule {
        nodes: ref_nodes.iter().map(|&t| interval.from_reference(t)).collect(),
        weights: ref_weights.iter().map(|&w| w * half).collect(),
        interval,
    })
}

/// Standard (unnormalized) `P_n(t)` and `P_n'(t)`.
fn legendre_with_deriv(n: usize, t: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    (p, nf * (t * p - p_prev) / (t * t - 1.0))
}
