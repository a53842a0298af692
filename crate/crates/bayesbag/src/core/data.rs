//! Datasets: ordered collections of fixed-width observation rows.

use crate::error::{Error, Result};

/// An ordered collection of observations, the unit being resampled.
///
/// Each row is a fixed-width real vector. For regression data a row is
/// `(y, z_1, ..., z_D)`: the response followed by the regressors. Row order
/// is significant, since bootstrap count vectors index observations by
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<f64>,
    width: usize,
}

impl Dataset {
    /// Builds a dataset from rows, checking that all rows share one width.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("dataset must have n >= 1 rows".into()));
        }
        let width = rows[0].len();
        if width == 0 {
            return Err(Error::InvalidArgument("rows must have width >= 1".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Dataset { values, width })
    }

    /// Builds a dataset of scalar observations (width 1).
    pub fn from_scalars(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidArgument("dataset must have n >= 1 rows".into()));
        }
        Ok(Dataset {
            values: xs.to_vec(),
            width: 1,
        })
    }

    /// Builds a regression dataset with rows `(y_n, z_n1, ..., z_nD)`.
    pub fn from_regression(y: &[f64], z: &[Vec<f64>]) -> Result<Self> {
        if y.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: z.len(),
            });
        }
        let rows: Vec<Vec<f64>> = y
            .iter()
            .zip(z)
            .map(|(yi, zi)| {
                let mut row = Vec::with_capacity(1 + zi.len());
                row.push(*yi);
                row.extend_from_slice(zi);
                row
            })
            .collect();
        Dataset::from_rows(&rows)
    }

    /// Number of rows N.
    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    /// A dataset always has at least one row.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Width of each row.
    pub fn width(&self) -> usize {
        self.width
    }

    /// The `n`-th row (0-based).
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.width..(n + 1) * self.width]
    }

    /// Iterator over rows.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    /// For regression rows `(y, z...)`: the response of row `n`.
    pub fn response(&self, n: usize) -> f64 {
        self.row(n)[0]
    }

    /// For regression rows `(y, z...)`: the regressors of row `n`.
    pub fn regressors(&self, n: usize) -> &[f64] {
        &self.row(n)[1..]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_roundtrip() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.width(), 2);
        assert_eq!(d.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = Dataset::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn empty_rejected() {
        assert!(Dataset::from_rows(&[]).is_err());
        assert!(Dataset::from_scalars(&[]).is_err());
    }

    #[test]
    fn regression_layout() {
        let d = Dataset::from_regression(&[1.0, 2.0], &[vec![5.0], vec![6.0]]).unwrap();
        assert_eq!(d.response(1), 2.0);
        assert_eq!(d.regressors(1), &[6.0]);
    }
}
