use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `rows x dim` matrix of input locations, stored row-major.
///
/// Every entry is finite and there is at least one row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
}

impl DesignMatrix {
    pub fn from_flat(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("design dimension must be positive"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::input("design must have at least one complete row"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("design contains a non-finite entry"));
        }
        let rows = data.len() / dim;
        Ok(Self { data, rows, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(data, dim)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { data, rows: indices.len(), dim: self.dim }
    }

    pub(crate) fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Per-column `(min, max)`.
    pub fn column_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges: Vec<(f64, f64)> = self.row(0).iter().map(|&v| (v, v)).collect();
        for r in self.iter_rows() {
            for (range, &v) in ranges.iter_mut().zip(r) {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        ranges
    }

    /// Map each column affinely onto `[0, 1]` using the recorded ranges.
    /// Constant columns map to zero.
    pub fn normalized(&self) -> (Self, Vec<(f64, f64)>) {
        let ranges = self.column_ranges();
        let mut data = self.data.clone();
        for r in data.chunks_exact_mut(self.dim) {
            for (v, &(lo, hi)) in r.iter_mut().zip(&ranges) {
                let w = hi - lo;
                *v = if w > 0.0 { ((*v - lo) / w).clamp(0.0, 1.0) } else { 0.0 };
            }
        }
        (Self { data, rows: self.rows, dim: self.dim }, ranges)
    }

    /// Divide column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<Self> {
        crate::error::check_dim(self.dim, factors.len())?;
        let mut data = self.data.clone();
        for r in data.chunks_exact_mut(self.dim) {
            for (v, f) in r.iter_mut().zip(factors) {
                *v /= f;
            }
        }
        Self::from_flat(data, self.dim)
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_ragged_and_nonfinite() {
        assert!(DesignMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(DesignMatrix::from_flat(vec![1.0, f64::NAN], 1).is_err());
        assert!(DesignMatrix::from_flat(vec![], 2).is_err());
    }

    #[test]
    fn normalize_and_ranges() {
        let d = DesignMatrix::from_rows(&[[1.0, 5.0], [3.0, 5.0], [2.0, 5.0]]).unwrap();
        assert_eq!(d.column_ranges(), vec![(1.0, 3.0), (5.0, 5.0)]);
        let (n, _) = d.normalized();
        assert_eq!(n.as_flat(), &[0.0, 0.0, 1.0, 0.0, 0.5, 0.0]);
        assert_eq!(d.select(&[2, 0]).as_flat(), &[2.0, 5.0, 1.0, 5.0]);
    }
}
