use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A high-frequency indicator matrix together with its column names.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorPanel {
    data: DMatrix<f64>,
    names: Vec<String>,
}

impl IndicatorPanel {
    pub fn new(data: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != data.ncols() {
            return Err(Error::Shape(format!(
                "panel has {} columns but {} names were given",
                data.ncols(),
                names.len()
            )));
        }
        Ok(Self { data, names })
    }

    /// Panel with synthetic column names `x1..xd`.
    pub fn unnamed(data: DMatrix<f64>) -> Self {
        let names = (1..=data.ncols()).map(|j| format!("x{j}")).collect();
        Self { data, names }
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    /// New panel keeping only the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        for &j in indices {
            if j >= self.n_cols() {
                return Err(Error::Shape(format!(
                    "column index {j} out of range for a {}-column panel",
                    self.n_cols()
                )));
            }
        }
        let data = DMatrix::from_fn(self.n_rows(), indices.len(), |i, k| {
            self.data[(i, indices[k])]
        });
        let names = indices.iter().map(|&j| self.names[j].clone()).collect();
        Ok(Self { data, names })
    }
}
