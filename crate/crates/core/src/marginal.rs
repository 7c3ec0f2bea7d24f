//! Gaussian KDE of the nearest-neighbour 2- and 3-marginals and their projection
//! onto the tensor-product Legendre basis.
//!
//! For `1 < k < d` the marginal of `(x_{k-1}, x_k, x_{k+1})` is projected into an
//! `M^2 x M` matrix whose row `(i, j)` (stored at `i * M + j`, zero-based) pairs
//! `L_i(x_{k-1}) L_j(x_k)` and whose column pairs `L_m(x_{k+1})`. The end marginals
//! `(x_1, x_2)` and `(x_{d-1}, x_d)` give `M x M` matrices.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::basis::{BasisSpec, Interval, QuadratureRule};
use crate::error::{Error, Result};
use crate::samples::SampleSet;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Contiguous columns of a sample set feeding marginal `k` (1-based).
#[derive(Debug, Clone)]
pub struct MarginalSlice<'a> {
    k: usize,
    first_col: usize,
    interval: Interval,
    data: ArrayView2<'a, f64>,
}

impl<'a> MarginalSlice<'a> {
    pub fn k(&self) -> usize {
        self.k
    }

    /// 2 at the chain ends, 3 elsewhere.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// 1-based column indices of the slice.
    pub fn columns(&self) -> Vec<usize> {
        (self.first_col + 1..=self.first_col + self.dim()).collect()
    }

    pub fn data(&self) -> ArrayView2<'a, f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }
}

/// Borrows the columns of marginal `k`: `(1,2)` for `k = 1`, `(d-1,d)` for `k = d`,
/// `(k-1,k,k+1)` otherwise.
pub fn slice_marginal(samples: &SampleSet, k: usize) -> Result<MarginalSlice<'_>> {
    let d = samples.dim();
    if k < 1 || k > d {
        return Err(Error::Argument(format!("marginal index {k} outside 1..={d}")));
    }
    let (first, last) = if k == 1 {
        (0, 2)
    } else if k == d {
        (d - 2, d)
    } else {
        (k - 2, k + 1)
    };
    Ok(MarginalSlice {
        k,
        first_col: first,
        interval: samples.interval(),
        data: samples.data().slice_move(s![.., first..last]),
    })
}

/// Silverman-style isotropic bandwidth `sigma * N^(-1/(dim+4))`, where `sigma` is the
/// mean of the per-column sample standard deviations.
pub fn default_bandwidth(slice: &MarginalSlice<'_>) -> Result<f64> {
    let n = slice.len();
    if n < 2 {
        return Err(Error::Argument("bandwidth needs at least 2 samples".into()));
    }
    let stds: Vec<f64> = slice
        .data
        .axis_iter(Axis(1))
        .map(|col| {
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        })
        .collect();
    if stds.iter().all(|&s| s == 0.0) {
        return Err(Error::DegenerateData(format!("marginal {} has zero variance in every column", slice.k)));
    }
    let sigma = stds.iter().sum::<f64>() / stds.len() as f64;
    Ok(sigma * (n as f64).powf(-1.0 / (slice.dim() as f64 + 4.0)))
}

/// Gaussian kernel density estimate of one marginal slice.
#[derive(Debug, Clone)]
pub struct MarginalKDE<'a> {
    slice: MarginalSlice<'a>,
    h: f64,
}

impl<'a> MarginalKDE<'a> {
    pub fn new(slice: MarginalSlice<'a>, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Argument(format!("bandwidth must be positive, got {h}")));
        }
        Ok(Self { slice, h })
    }

    /// KDE with the default bandwidth.
    pub fn with_default_bandwidth(slice: MarginalSlice<'a>) -> Result<Self> {
        let h = default_bandwidth(&slice)?;
        Self::new(slice, h)
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn slice(&self) -> &MarginalSlice<'a> {
        &self.slice
    }

    /// `(1 / (N h^dim)) sum_i K((point - x_i) / h)` with the standard Gaussian `K`.
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        let dim = self.slice.dim();
        if point.len() != dim {
            return Err(Error::Argument(format!("point has {} coordinates, marginal has {dim}", point.len())));
        }
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite evaluation point".into()));
        }
        let inv_h2 = 1.0 / (self.h * self.h);
        let sum: f64 = self
            .slice
            .data
            .rows()
            .into_iter()
            .map(|row| {
                let r2: f64 = row.iter().zip(point).map(|(x, p)| (p - x) * (p - x)).sum();
                (-0.5 * r2 * inv_h2).exp()
            })
            .sum();
        let n = self.slice.len() as f64;
        Ok(sum * INV_SQRT_2PI.powi(dim as i32) / (n * self.h.powi(dim as i32)))
    }
}

/// Legendre coefficients of one projected marginal.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalCoeffs {
    k: usize,
    m: usize,
    entries: Array2<f64>,
}

impl MarginalCoeffs {
    /// Wraps precomputed coefficients: `M x M` for a 2-marginal, `M^2 x M` for a 3-marginal.
    pub fn from_entries(k: usize, m: usize, entries: Array2<f64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if cols != m || (rows != m && rows != m * m) {
            return Err(Error::Argument(format!(
                "coefficient matrix {rows}x{cols} is neither {m}x{m} nor {}x{m}",
                m * m
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("non-finite marginal coefficient".into()));
        }
        Ok(Self { k, m, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn basis_size(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Coefficient by 1-based multi-index (two or three entries).
    pub fn get(&self, idx: &[usize]) -> f64 {
        match idx {
            [i, m] => self.entries[[i - 1, m - 1]],
            [i, j, m] => self.entries[[(i - 1) * self.m + (j - 1), m - 1]],
            _ => panic!("marginal coefficients take 2 or 3 indices"),
        }
    }
}

/// Projects a KDE onto the tensor-product basis with tensor-product quadrature.
///
/// The Gaussian kernel factorizes per coordinate, so each coordinate gets one
/// `l x N` kernel table that is first reduced against the weighted basis and then
/// contracted across coordinates.
pub fn project_kde(kde: &MarginalKDE<'_>, basis: &BasisSpec, quad: &QuadratureRule) -> Result<MarginalCoeffs> {
    if basis.interval() != quad.interval() {
        return Err(Error::Configuration("quadrature and basis are defined on different intervals".into()));
    }
    if basis.interval() != kde.slice.interval {
        return Err(Error::Configuration("samples and basis are defined on different intervals".into()));
    }
    let m = basis.size();
    let n = kde.slice.len();
    let dim = kde.slice.dim();
    let l = quad.len();

    // weighted_basis[i, q] = w_q L_i(x_q)
    let mut weighted_basis = basis.table(&quad.nodes).reversed_axes().to_owned();
    for (mut col, &w) in weighted_basis.axis_iter_mut(Axis(1)).zip(&quad.weights) {
        col *= w;
    }

    let inv_h = 1.0 / kde.h;
    let projected: Vec<Array2<f64>> = (0..dim)
        .map(|c| {
            let column = kde.slice.data.column(c);
            let mut kernel = Array2::<f64>::zeros((l, n));
            for (q, &node) in quad.nodes.iter().enumerate() {
                for (slot, &x) in kernel.row_mut(q).iter_mut().zip(column.iter()) {
                    let z = (node - x) * inv_h;
                    *slot = INV_SQRT_2PI * inv_h * (-0.5 * z * z).exp();
                }
            }
            weighted_basis.dot(&kernel)
        })
        .collect();

    let inv_n = 1.0 / n as f64;
    let entries = if dim == 2 {
        projected[0].dot(&projected[1].t()) * inv_n
    } else {
        let mut out = Array2::<f64>::zeros((m * m, m));
        const CHUNK: usize = 2048;
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let p0 = projected[0].slice(s![.., start..end]);
            let p1 = projected[1].slice(s![.., start..end]);
            let p2 = projected[2].slice(s![.., start..end]);
            let mut pair = Array2::<f64>::zeros((m * m, end - start));
            for i in 0..m {
                for j in 0..m {
                    let mut row = pair.row_mut(i * m + j);
                    row.assign(&p0.row(i));
                    row *= &p1.row(j);
                }
            }
            out += &pair.dot(&p2.t());
            start = end;
        }
        out * inv_n
    };
    MarginalCoeffs::from_entries(kde.slice.k, m, entries)
}
