//! Temporal disaggregation of low-frequency time series.
//!
//! Given an observed low-frequency benchmark series (say, annual totals) and
//! a panel of high-frequency indicator series believed to co-move with it,
//! this crate estimates the unobserved high-frequency series subject to the
//! temporal consistency constraint: re-aggregating the estimate reproduces
//! the benchmark.
//!
//! Two families of estimators are provided:
//!
//! * classical GLS regressions ([`disaggregate_classical`]) with AR(1)
//!   (Chow-Lin), random-walk (Fernandez) and random-walk-Markov (Litterman)
//!   residual models, profiling the autocorrelation over a grid;
//! * sparse high-dimensional variants ([`sp_td`], [`adaptive_sp_td`]) that
//!   penalize the whitened regression with an l1 term, trace the LARS
//!   solution path, debias by least squares refits and select
//!   `(rho, lambda)` by BIC — usable when the panel is wider than the
//!   benchmark is long.
//!
//! A seeded synthetic data generator ([`dgp`]) supports simulation studies.

// `!(x > tol)` guards are used on purpose: they reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod covariance;
pub mod dgp;
pub mod error;
pub mod gls;
pub mod lars;
pub mod panel;
pub mod result;
pub mod sparse;

pub use aggregation::{AggregationMode, AggregationSpec};
pub use covariance::{
    build_ar1_shape, build_fernandez_shape, build_litterman_shape, CovarianceFactor,
    CovarianceKind, CovarianceModel,
};
pub use dgp::{generate, generate_errors, DgpConfig, DgpOutput};
pub use error::{Error, Result};
pub use gls::{
    default_rho_grid, disaggregate_classical, gaussian_loglik, gls_estimate, profile_rho_search,
    GlsFit,
};
pub use lars::{lars_path, LarsAction, LarsKnot, LarsPath};
pub use panel::IndicatorPanel;
pub use result::{BicPoint, DisaggregationResult, FitInfo, Method, RhoLoglik, Trace};
pub use sparse::{
    adaptive_sp_td, bic_select, debias_refit, sp_td, whiten_problem, DebiasedKnot, SparseFit,
};
