//! Correlation-based indicator pre-filtering.
//!
//! Wide financial panels routinely carry near-duplicate series (levels and
//! their trailing versions, ratios sharing a numerator). Columns are
//! scanned in index order and a later column is dropped whenever its
//! absolute correlation with an earlier surviving column exceeds the
//! threshold, so the first of any correlated group survives. Zero-variance
//! columns cannot enter a correlation and are dropped with their own flag.

use disagg_core::IndicatorPanel;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    /// |corr| with an earlier kept column exceeded the threshold.
    Correlated,
    /// The column has (numerically) zero variance.
    ZeroVariance,
}

/// Audit record for one dropped column.
#[derive(Clone, Debug)]
pub struct DroppedColumn {
    pub index: usize,
    pub name: String,
    /// The earlier column that triggered the drop, for correlated drops.
    pub against: Option<usize>,
    pub correlation: Option<f64>,
    pub reason: DropReason,
}

/// Result of filtering: the surviving panel plus a full audit.
#[derive(Clone, Debug)]
pub struct FilterOutcome {
    pub panel: IndicatorPanel,
    pub kept: Vec<usize>,
    pub dropped: Vec<DroppedColumn>,
}

impl FilterOutcome {
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }
}

/// Drop later columns whose absolute pairwise correlation with an earlier
/// kept column exceeds `threshold`.
pub fn correlation_filter(panel: &IndicatorPanel, threshold: f64) -> Result<FilterOutcome> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(CliError::Config(format!(
            "correlation threshold must lie in (0, 1], got {threshold}"
        )));
    }
    let n = panel.n_rows();
    if n < 3 {
        return Err(CliError::Config(format!(
            "correlation filtering needs at least 3 rows, got {n}"
        )));
    }
    let d = panel.n_cols();
    let x = panel.data();

    // centered columns and their norms
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut norms: Vec<f64> = Vec::with_capacity(d);
    for j in 0..d {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        centered.push(c);
        norms.push(norm);
    }
    let scale = |j: usize| {
        let col = x.column(j);
        col.amax().max(1.0)
    };

    let mut kept: Vec<usize> = Vec::new();
    let mut dropped: Vec<DroppedColumn> = Vec::new();
    'cols: for j in 0..d {
        if norms[j] <= 1e-14 * scale(j) {
            dropped.push(DroppedColumn {
                index: j,
                name: panel.names()[j].clone(),
                against: None,
                correlation: None,
                reason: DropReason::ZeroVariance,
            });
            continue;
        }
        for &i in &kept {
            let dot: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let corr = dot / (norms[i] * norms[j]);
            if corr.abs() > threshold {
                dropped.push(DroppedColumn {
                    index: j,
                    name: panel.names()[j].clone(),
                    against: Some(i),
                    correlation: Some(corr),
                    reason: DropReason::Correlated,
                });
                continue 'cols;
            }
        }
        kept.push(j);
    }

    let filtered = panel.select_columns(&kept)?;
    Ok(FilterOutcome {
        panel: filtered,
        kept,
        dropped,
    })
}
