//! Sample sets and their CSV form (header `x1,...,xd`, one row per sample).

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};

use crate::basis::Interval;
use crate::error::{Error, Result};

/// `N` samples of a `d`-dimensional density supported on `interval^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Array2<f64>,
    interval: Interval,
}

impl SampleSet {
    pub fn new(data: Array2<f64>, interval: Interval) -> Result<Self> {
        let (n, d) = data.dim();
        if n < 2 {
            return Err(Error::Argument(format!("need at least 2 samples, got {n}")));
        }
        if d < 2 {
            return Err(Error::Argument(format!("need dimension at least 2, got {d}")));
        }
        if let Some(((i, j), v)) = data.indexed_iter().find(|(_, &v)| !interval.contains(v)) {
            return Err(Error::Domain(format!(
                "sample {i} coordinate {} = {v} outside [{}, {}]",
                j + 1,
                interval.lower(),
                interval.upper()
            )));
        }
        Ok(Self { data, interval })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// The first `n` rows as a new set.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(self.data.slice(ndarray::s![..n, ..]).to_owned(), self.interval)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.index_axis(Axis(0), i).to_vec()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_matrix_csv(path, self.data.view())
    }

    pub fn read_csv(path: &Path, interval: Interval) -> Result<Self> {
        Self::new(read_matrix_csv(path)?, interval)
    }
}

/// Writes a matrix with header `x1,...,xd`, values in 17 significant digits.
pub fn write_matrix_csv(path: &Path, data: ArrayView2<'_, f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=data.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| format_f17(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != d {
            return Err(Error::Format(format!(
                "{}: row {} has {} fields, expected {d}",
                path.display(),
                rows + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("{}: bad number {field:?}: {e}", path.display())))?,
            );
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, d), values).map_err(|e| Error::Format(e.to_string()))
}

/// Scientific notation with 17 significant digits; round-trips every finite `f64`.
pub fn format_f17(v: f64) -> String {
    format!("{v:.16e}")
}
