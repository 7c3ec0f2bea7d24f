#![allow(dead_code)]

use ndarray::{Array1, Array2, Array3};
use ttflow::marginal::MarginalCoeffs;
use ttflow::{gauss_legendre, BasisSpec, FunctionalTT};

/// Coefficients of `f` in `basis`, exact for polynomials of degree below `2 * 40 - M`.
pub fn project_1d(f: impl Fn(f64) -> f64, basis: &BasisSpec) -> Vec<f64> {
    let q = gauss_legendre(40, basis.interval()).unwrap();
    let table = basis.table(&q.nodes);
    (0..basis.size()).map(|i| (0..q.nodes.len()).map(|n| q.weights[n] * f(q.nodes[n]) * table[[n, i]]).sum()).collect()
}

/// Builds a core `(ra, M, rb)` whose `[a, :, b]` fibre projects `f(a, b, x)`.
pub fn core_from_fn(ra: usize, rb: usize, basis: &BasisSpec, f: impl Fn(usize, usize, f64) -> f64) -> Array3<f64> {
    let m = basis.size();
    let mut core = Array3::zeros((ra, m, rb));
    for a in 0..ra {
        for b in 0..rb {
            let c = project_1d(|x| f(a, b, x), basis);
            for i in 0..m {
                core[[a, i, b]] = c[i];
            }
        }
    }
    core
}

fn integrated(core: &Array3<f64>, mass: f64) -> Array2<f64> {
    core.index_axis(ndarray::Axis(1), 0).mapv(|v| v * mass)
}

/// Exact marginal coefficient arrays of a TT: `(x1, x2)`, `(x_{k-1}, x_k, x_{k+1})`, `(x_{d-1}, x_d)`.
pub fn exact_marginal_coeffs(tt: &FunctionalTT) -> Vec<MarginalCoeffs> {
    let d = tt.dim();
    let m = tt.basis().size();
    let mass = tt.basis().interval().constant_mass();
    let cores = tt.cores();
    let mut left = vec![Array2::<f64>::ones((1, 1))];
    for k in 0..d {
        let next = left[k].dot(&integrated(&cores[k], mass));
        left.push(next);
    }
    let mut right = vec![Array2::<f64>::ones((1, 1)); d + 1];
    for k in (0..d).rev() {
        right[k] = integrated(&cores[k], mass).dot(&right[k + 1]);
    }
    let slice = |k: usize, i: usize| cores[k].index_axis(ndarray::Axis(1), i).to_owned();
    let mut out = Vec::with_capacity(d);
    for k in 1..=d {
        let (first, count) = if k == 1 {
            (0, 2)
        } else if k == d {
            (d - 2, 2)
        } else {
            (k - 2, 3)
        };
        let rows = m.pow(count as u32 - 1);
        let mut entries = Array2::zeros((rows, m));
        for r in 0..rows {
            for c in 0..m {
                let idx: Vec<usize> = if count == 2 { vec![r, c] } else { vec![r / m, r % m, c] };
                let mut acc = left[first].clone();
                for (off, &i) in idx.iter().enumerate() {
                    acc = acc.dot(&slice(first + off, i));
                }
                acc = acc.dot(&right[first + count]);
                entries[[r, c]] = acc[[0, 0]];
            }
        }
        out.push(MarginalCoeffs::from_entries(k, m, entries).unwrap());
    }
    out
}

pub fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}
