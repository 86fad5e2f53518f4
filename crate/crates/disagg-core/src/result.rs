use nalgebra::DVector;

use crate::aggregation::AggregationSpec;
use crate::error::Result;
use crate::gls::GlsFit;
use crate::sparse::SparseFit;

/// Disaggregation method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ChowLin,
    Fernandez,
    Litterman,
    SpTd,
    AdaptiveSpTd,
}

impl Method {
    pub fn is_sparse(&self) -> bool {
        matches!(self, Method::SpTd | Method::AdaptiveSpTd)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ChowLin => "chow-lin",
            Method::Fernandez => "fernandez",
            Method::Litterman => "litterman",
            Method::SpTd => "sp-td",
            Method::AdaptiveSpTd => "adaptive-sp-td",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fit details attached to a [`DisaggregationResult`].
#[derive(Clone, Debug)]
pub enum FitInfo {
    Gls(GlsFit),
    Sparse(SparseFit),
}

impl FitInfo {
    pub fn beta(&self) -> &DVector<f64> {
        match self {
            FitInfo::Gls(f) => &f.beta,
            FitInfo::Sparse(f) => &f.beta,
        }
    }

    pub fn rho(&self) -> f64 {
        match self {
            FitInfo::Gls(f) => f.rho,
            FitInfo::Sparse(f) => f.rho,
        }
    }

    pub fn sigma2(&self) -> f64 {
        match self {
            FitInfo::Gls(f) => f.sigma2,
            FitInfo::Sparse(f) => f.sigma2,
        }
    }

    pub fn loglik(&self) -> f64 {
        match self {
            FitInfo::Gls(f) => f.loglik,
            FitInfo::Sparse(f) => f.loglik,
        }
    }

    pub fn as_sparse(&self) -> Option<&SparseFit> {
        match self {
            FitInfo::Sparse(f) => Some(f),
            FitInfo::Gls(_) => None,
        }
    }
}

/// One profile-likelihood evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RhoLoglik {
    pub rho: f64,
    pub loglik: f64,
}

/// One evaluated point of the sparse (rho, lambda) selection grid.
#[derive(Clone, Copy, Debug)]
pub struct BicPoint {
    pub rho: f64,
    pub lambda: f64,
    /// Number of selected indicators (intercept excluded).
    pub df: usize,
    pub bic: f64,
}

/// Search trace recorded while fitting, for inspection and export.
#[derive(Clone, Debug)]
pub enum Trace {
    RhoProfile(Vec<RhoLoglik>),
    BicGrid(Vec<BicPoint>),
}

/// The estimated high-frequency series together with how it was obtained.
#[derive(Clone, Debug)]
pub struct DisaggregationResult {
    /// Estimated high-frequency series, length `n_high`.
    pub y_high: DVector<f64>,
    pub fit: FitInfo,
    pub method: Method,
    pub spec: AggregationSpec,
    /// Names of indicators with nonzero coefficients.
    pub selected_columns: Vec<String>,
    pub trace: Trace,
}

impl DisaggregationResult {
    /// Re-aggregate the estimate: `C * y_high`.
    pub fn aggregated(&self) -> Result<DVector<f64>> {
        self.spec.aggregate(&self.y_high)
    }

    /// Largest per-period consistency residual `|C y_high - y_q|`, relative
    /// to the magnitude of the benchmark series.
    pub fn max_consistency_residual(&self, y_q: &DVector<f64>) -> Result<f64> {
        let agg = self.aggregated()?;
        let scale = y_q.amax().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..y_q.len() {
            worst = worst.max((agg[i] - y_q[i]).abs() / scale);
        }
        Ok(worst)
    }
}
