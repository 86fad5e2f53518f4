//! Aggregation matrices mapping high-frequency periods to low-frequency ones.
//!
//! The matrix `C` has one row per observed low-frequency period. Row `i`
//! carries a weight pattern over the block of `ratio` high-frequency periods
//! it covers; any trailing columns beyond `n_low * ratio` are zero, which is
//! how extrapolation periods (high-frequency periods with no benchmark) are
//! encoded.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::IndicatorPanel;

/// How a block of high-frequency values maps to its low-frequency benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregationMode {
    /// Flow data: the block sums to the benchmark.
    Sum,
    /// The benchmark is the block mean.
    Average,
    /// Stock data anchored at the first period of the block.
    First,
    /// Stock data anchored at the last period of the block.
    Last,
}

impl AggregationMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggregationMode::Sum => "sum",
            AggregationMode::Average => "average",
            AggregationMode::First => "first",
            AggregationMode::Last => "last",
        }
    }
}

impl std::fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape of the aggregation: mode, block length and both series lengths.
///
/// `n_high >= n_low * ratio`; the surplus columns form the extrapolation
/// region and receive zero weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AggregationSpec {
    mode: AggregationMode,
    ratio: usize,
    n_low: usize,
    n_high: usize,
}

impl AggregationSpec {
    pub fn new(
        mode: AggregationMode,
        ratio: usize,
        n_low: usize,
        n_high: usize,
    ) -> Result<Self> {
        if ratio < 1 {
            return Err(Error::Domain("aggregation ratio must be at least 1".into()));
        }
        if n_low < 1 {
            return Err(Error::Domain("n_low must be at least 1".into()));
        }
        if n_high < n_low * ratio {
            return Err(Error::Domain(format!(
                "n_high = {n_high} is smaller than n_low * ratio = {}",
                n_low * ratio
            )));
        }
        Ok(Self {
            mode,
            ratio,
            n_low,
            n_high,
        })
    }

    /// Spec without an extrapolation region: `n_high = n_low * ratio`.
    pub fn exact(mode: AggregationMode, ratio: usize, n_low: usize) -> Result<Self> {
        Self::new(mode, ratio, n_low, n_low * ratio)
    }

    pub fn mode(&self) -> AggregationMode {
        self.mode
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn n_low(&self) -> usize {
        self.n_low
    }

    pub fn n_high(&self) -> usize {
        self.n_high
    }

    /// Number of trailing high-frequency periods without a benchmark.
    pub fn n_extrapolated(&self) -> usize {
        self.n_high - self.n_low * self.ratio
    }

    /// Weight of position `offset` (0-based) inside a block.
    fn weight(&self, offset: usize) -> f64 {
        match self.mode {
            AggregationMode::Sum => 1.0,
            AggregationMode::Average => 1.0 / self.ratio as f64,
            AggregationMode::First => {
                if offset == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            AggregationMode::Last => {
                if offset + 1 == self.ratio {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// The dense `n_low x n_high` aggregation matrix `C`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.n_low, self.n_high);
        for i in 0..self.n_low {
            for k in 0..self.ratio {
                c[(i, i * self.ratio + k)] = self.weight(k);
            }
        }
        c
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n_high {
            return Err(Error::Shape(format!(
                "input has {rows} rows but the aggregation expects n_high = {}",
                self.n_high
            )));
        }
        Ok(())
    }

    /// `C * x` for a high-frequency series.
    pub fn aggregate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(x.len())?;
        let mut out = DVector::zeros(self.n_low);
        for i in 0..self.n_low {
            let mut acc = 0.0;
            for k in 0..self.ratio {
                acc += self.weight(k) * x[i * self.ratio + k];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `C * M` applied to the rows of an `n_high x d` matrix.
    pub fn aggregate_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(m.nrows())?;
        let d = m.ncols();
        let mut out = DMatrix::zeros(self.n_low, d);
        for j in 0..d {
            for i in 0..self.n_low {
                let mut acc = 0.0;
                for k in 0..self.ratio {
                    acc += self.weight(k) * m[(i * self.ratio + k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// `M * C^T`, aggregating the columns of an `r x n_high` matrix.
    pub fn aggregate_columns(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if m.ncols() != self.n_high {
            return Err(Error::Shape(format!(
                "input has {} columns but the aggregation expects n_high = {}",
                m.ncols(),
                self.n_high
            )));
        }
        let r = m.nrows();
        let mut out = DMatrix::zeros(r, self.n_low);
        for i in 0..r {
            for j in 0..self.n_low {
                let mut acc = 0.0;
                for k in 0..self.ratio {
                    acc += self.weight(k) * m[(i, j * self.ratio + k)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(out)
    }

    /// `C * S * C^T` for an `n_high x n_high` covariance shape.
    pub fn aggregate_cov(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let half = self.aggregate_matrix(s)?;
        self.aggregate_columns(&half)
    }

    /// `C^T * v`: spread a low-frequency vector back over the blocks.
    pub fn expand(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n_low {
            return Err(Error::Shape(format!(
                "input has {} entries but the aggregation expects n_low = {}",
                v.len(),
                self.n_low
            )));
        }
        let mut out = DVector::zeros(self.n_high);
        for i in 0..self.n_low {
            for k in 0..self.ratio {
                out[i * self.ratio + k] = self.weight(k) * v[i];
            }
        }
        Ok(out)
    }

    /// Aggregate an indicator panel, preserving its column names.
    pub fn aggregate_panel(&self, panel: &IndicatorPanel) -> Result<IndicatorPanel> {
        let data = self.aggregate_matrix(panel.data())?;
        IndicatorPanel::new(data, panel.names().to_vec())
    }
}
