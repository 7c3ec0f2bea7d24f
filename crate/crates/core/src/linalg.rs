//! Small dense decompositions, backed by nalgebra, on ndarray matrices.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};

fn to_na(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Thin SVD with singular values sorted descending and each left singular vector's
/// largest-magnitude entry made positive (the matching right vector flips with it).
pub struct Svd {
    pub u: Array2<f64>,
    pub singular_values: Array1<f64>,
    pub vt: Array2<f64>,
}

pub fn svd(a: ArrayView2<'_, f64>) -> Svd {
    let na = to_na(a);
    let dec = na.svd(true, true);
    let u = dec.u.expect("requested U");
    let vt = dec.v_t.expect("requested V^T");
    let s = dec.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    let rows = u.nrows();
    let cols = vt.ncols();
    let mut u_out = Array2::zeros((rows, order.len()));
    let mut vt_out = Array2::zeros((order.len(), cols));
    let mut s_out = Array1::zeros(order.len());
    for (dst, &src) in order.iter().enumerate() {
        let col = u.column(src);
        let pivot = col.iter().copied().fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..rows {
            u_out[[i, dst]] = sign * col[i];
        }
        for j in 0..cols {
            vt_out[[dst, j]] = sign * vt[(src, j)];
        }
        s_out[dst] = s[src];
    }
    Svd { u: u_out, singular_values: s_out, vt: vt_out }
}

/// Numerical rank: singular values above `max(m, n) * eps * s_max`.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> usize {
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let tol = rows.max(cols) as f64 * f64::EPSILON * smax;
    singular_values.iter().filter(|&&s| s > tol).count()
}

/// Minimum-norm least-squares solution of `A X = B` via the SVD of `A`.
pub struct LeastSquares {
    pub solution: Array2<f64>,
    pub residual: f64,
    pub rank: usize,
}

pub fn lstsq(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> LeastSquares {
    let dec = svd(a);
    let s = dec.singular_values.as_slice().expect("contiguous");
    let rank = numerical_rank(s, a.nrows(), a.ncols());
    // X = V diag(1/s) U^T B restricted to the numerical range.
    let utb = dec.u.t().dot(&b);
    let mut scaled = Array2::<f64>::zeros((a.ncols(), b.ncols()));
    for r in 0..rank {
        let inv = 1.0 / s[r];
        for j in 0..b.ncols() {
            let c = utb[[r, j]] * inv;
            for i in 0..a.ncols() {
                scaled[[i, j]] += dec.vt[[r, i]] * c;
            }
        }
    }
    let resid = &a.dot(&scaled) - &b;
    let residual = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    LeastSquares { solution: scaled, residual, rank }
}
