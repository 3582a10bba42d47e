use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x p` sample stored row-major; row `i` is observation `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Domain(format!(
                "dataset must be non-empty, got {n}x{p}"
            )));
        }
        if values.len() != n * p {
            return Err(Error::Domain(format!(
                "expected {} values for a {n}x{p} dataset, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value at row {}, column {}",
                pos / p + 1,
                pos % p + 1
            )));
        }
        Ok(Dataset { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Domain("rows have unequal lengths".into()));
        }
        Self::new(n, p, rows.concat())
    }

    /// A single-column dataset.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.p + j]).collect()
    }

    /// Rows reordered so that new row `k` is old row `perm[k]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Domain("permutation length differs from n".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for &i in perm {
            values.extend_from_slice(self.row(i));
        }
        Self::new(self.n, self.p, values)
    }

    /// Applies `f` to every entry of column `j`.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut values = self.values.clone();
        for i in 0..self.n {
            values[i * self.p + j] = f(values[i * self.p + j]);
        }
        Self::new(self.n, self.p, values)
    }
}
