use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An `n x m` matrix over {-1, +1}; column `k` is the labeling of task `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    values: DMatrix<f64>,
}

impl LabelMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidInput(format!(
                "label matrix entries must be -1 or +1, found {bad}"
            )));
        }
        Ok(LabelMatrix { values })
    }

    /// All-negative matrix with the listed `(row, column)` entries set to +1.
    pub fn from_positives(
        n: usize,
        m: usize,
        positives: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut values = DMatrix::from_element(n, m, -1.0);
        for (i, k) in positives {
            values[(i, k)] = 1.0;
        }
        LabelMatrix { values }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_positive(&self, i: usize, k: usize) -> bool {
        self.values[(i, k)] > 0.0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Row indices of the positive entries of column `k`, ascending.
    pub fn positives(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.is_positive(i, k)).collect()
    }

    pub fn positive_count(&self, k: usize) -> usize {
        self.values.column(k).iter().filter(|&&v| v > 0.0).count()
    }

    /// Rows `rows` of the matrix, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.values.select_rows(rows)
    }
}
