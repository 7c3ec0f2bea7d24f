use ndarray::Array2;
use rand::Rng;

use super::{conditional_coeffs, left_step, FunctionalTT};
use crate::error::{Error, Result};

/// Points per conditional grid.
pub const DEFAULT_GRID: usize = 512;

/// Sequential conditional sampler. Each 1D conditional is evaluated on a uniform
/// grid, negatives are clipped to zero and the CDF is inverted by linear interpolation.
#[derive(Debug, Clone)]
pub struct TtSampler {
    tt: FunctionalTT,
    rights: Vec<Vec<f64>>,
    grid: Vec<f64>,
    table: Array2<f64>,
}

impl TtSampler {
    pub fn new(tt: &FunctionalTT, grid_points: usize) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::Argument(format!("sampling grid needs at least 2 points, got {grid_points}")));
        }
        let iv = tt.basis().interval();
        let step = iv.width() / (grid_points - 1) as f64;
        let grid: Vec<f64> = (0..grid_points)
            .map(|g| if g + 1 == grid_points { iv.upper() } else { iv.lower() + g as f64 * step })
            .collect();
        let table = tt.basis().table(&grid);
        Ok(Self { tt: tt.clone(), rights: tt.right_integrals(), grid, table })
    }

    pub fn dim(&self) -> usize {
        self.tt.dim()
    }

    /// One draw; the flag is true when some conditional had no positive mass on the grid
    /// and that coordinate was drawn uniformly instead.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, bool) {
        let d = self.tt.dim();
        let m = self.tt.basis().size();
        let g = self.grid.len();
        let mut x = Vec::with_capacity(d);
        let mut left = vec![1.0];
        let mut phi = vec![0.0; m];
        let mut values = vec![0.0; g];
        let mut cdf = vec![0.0; g];
        let mut fell_back = false;
        for k in 0..d {
            let coef = conditional_coeffs(&left, &self.tt.cores()[k], &self.rights[k + 1]);
            for (gi, v) in values.iter_mut().enumerate() {
                let row = self.table.row(gi);
                let val: f64 = row.iter().zip(&coef).map(|(p, c)| p * c).sum();
                *v = val.max(0.0);
            }
            cdf[0] = 0.0;
            for gi in 1..g {
                let dx = self.grid[gi] - self.grid[gi - 1];
                cdf[gi] = cdf[gi - 1] + 0.5 * (values[gi] + values[gi - 1]) * dx;
            }
            let total = cdf[g - 1];
            let xk = if total > 0.0 && total.is_finite() {
                let u = rng.random::<f64>() * total;
                let seg = cdf.partition_point(|&c| c <= u).clamp(1, g - 1);
                let (c0, c1) = (cdf[seg - 1], cdf[seg]);
                let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                self.grid[seg - 1] + frac.clamp(0.0, 1.0) * (self.grid[seg] - self.grid[seg - 1])
            } else {
                fell_back = true;
                let iv = self.tt.basis().interval();
                rng.random_range(iv.lower()..=iv.upper())
            };
            self.tt.basis().eval_into(xk, &mut phi);
            left = left_step(&left, &self.tt.cores()[k], &phi);
            x.push(xk);
        }
        (x, fell_back)
    }

    /// `n` draws as rows, plus the number of draws that needed the uniform fallback.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Array2<f64>, usize) {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let mut fallbacks = 0;
        for i in 0..n {
            let (x, fb) = self.sample_one(rng);
            fallbacks += fb as usize;
            for (k, v) in x.into_iter().enumerate() {
                out[[i, k]] = v;
            }
        }
        (out, fallbacks)
    }
}
