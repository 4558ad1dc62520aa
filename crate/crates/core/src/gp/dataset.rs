//! Training sets: inputs stored row-wise, one output column per dimension.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::dynamics::SampledPair;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// N×D inputs, one row per sample.
    pub x: DMatrix<f64>,
    /// N×P outputs, one column per output dimension.
    pub y: DMatrix<f64>,
    /// Sample times (s); zeros when the data is not a time series.
    pub t: Vec<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        Self::with_times(x, y, vec![0.0; n])
    }

    pub fn with_times(x: DMatrix<f64>, y: DMatrix<f64>, t: Vec<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if x.nrows() != y.nrows() || t.len() != x.nrows() {
            return Err(Error::invalid(format!(
                "dataset length mismatch: {} inputs, {} outputs, {} times",
                x.nrows(),
                y.nrows(),
                t.len()
            )));
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::invalid("dataset needs at least one input and one output column"));
        }
        Ok(Self { x, y, t })
    }

    /// Single-output dataset from a column of targets.
    pub fn single(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = y.len();
        Self::new(x, DMatrix::from_column_slice(n, 1, y.as_slice()))
    }

    pub fn from_pairs(pairs: &[SampledPair]) -> Result<Self> {
        let n = pairs.len();
        if n == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        let x = DMatrix::from_fn(n, 9, |i, j| pairs[i].x_tilde[j]);
        let y = DMatrix::from_fn(n, 3, |i, j| pairs[i].y[j]);
        Self::with_times(x, y, pairs.iter().map(|p| p.t).collect())
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn output(&self, j: usize) -> DVector<f64> {
        self.y.column(j).into_owned()
    }

    /// SHA-256 over the shape and the little-endian bytes of every value.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for n in [self.len(), self.input_dim(), self.output_dim()] {
            h.update((n as u64).to_le_bytes());
        }
        for v in self.x.iter().chain(self.y.iter()).chain(self.t.iter()) {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes `t, x1..xD, y1..yP` with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.input_dim()).map(|i| format!("x{i}")));
        header.extend((1..=self.output_dim()).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let (xr, yr) = (self.x.row(i), self.y.row(i));
            let row = std::iter::once(self.t[i]).chain(xr.iter().cloned()).chain(yr.iter().cloned());
            w.write_record(row.map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let d = header.iter().filter(|h| h.starts_with('x')).count();
        let p = header.iter().filter(|h| h.starts_with('y')).count();
        if header.len() != 1 + d + p || header.get(0) != Some("t") {
            return Err(Error::invalid(format!("unexpected dataset header: {header:?}")));
        }
        let mut t = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            t.push(vals[0]);
            xs.extend_from_slice(&vals[1..1 + d]);
            ys.extend_from_slice(&vals[1 + d..]);
        }
        let n = t.len();
        Self::with_times(DMatrix::from_row_slice(n, d, &xs), DMatrix::from_row_slice(n, p, &ys), t)
    }
}

/// Population standard deviation.
pub(crate) fn std_dev<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().cloned().collect();
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt()
}
