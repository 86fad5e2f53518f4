//! Generalized least squares estimation, profile-likelihood search over the
//! autocorrelation parameter, and the classical disaggregation step.
//!
//! Estimation always goes through the whitened problem: with `S_q = L L^T`,
//! the GLS objective `||S_q^{-1/2}(y - X b)||^2` becomes an ordinary least
//! squares problem in `L^{-1} y` and `L^{-1} X`, solved by column-pivoted QR.
//! Explicit inverses are never formed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::aggregation::AggregationSpec;
use crate::covariance::{CovarianceFactor, CovarianceModel};
use crate::error::{Error, Result};
use crate::panel::IndicatorPanel;
use crate::result::{DisaggregationResult, FitInfo, Method, RhoLoglik, Trace};

/// Relative pivot threshold below which the whitened design is declared
/// rank-deficient.
const RANK_RTOL: f64 = 1e-10;

/// Residual sum of squares at or below this fraction of the total sum of
/// squares is treated as an exact fit (`sigma2 = 0`, `loglik = +inf`).
const EXACT_FIT_RTOL: f64 = 1e-20;

/// A fitted GLS regression on the low-frequency scale.
#[derive(Clone, Debug)]
pub struct GlsFit {
    /// Coefficients, one per design column.
    pub beta: DVector<f64>,
    /// Autocorrelation the fit was evaluated at; 0 for shapes without one.
    pub rho: f64,
    /// Profiled innovation scale, `r^T S_q^{-1} r / n`. Zero for exact fits.
    pub sigma2: f64,
    /// Gaussian log-likelihood at the profiled estimates; `+inf` for exact
    /// fits.
    pub loglik: f64,
    /// Unwhitened residuals `y_q - X_q beta`.
    pub residuals_low: DVector<f64>,
}

/// Default grid for the autocorrelation search: 199 equally spaced points in
/// [-0.99, 0.99], i.e. a step of 0.01.
pub fn default_rho_grid() -> Vec<f64> {
    let n = 199;
    let (lo, hi) = (-0.99, 0.99);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Least squares solution of an already-whitened system via column-pivoted
/// QR, with a relative pivot rank check.
pub(crate) fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = x.nrows();
    let d = x.ncols();
    if d == 0 {
        return Ok(DVector::zeros(0));
    }
    if n < d {
        return Err(Error::Rank(format!(
            "design has more columns ({d}) than rows ({n})"
        )));
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if !(lead > 0.0) {
        return Err(Error::Rank("design is identically zero".into()));
    }
    for i in 0..d {
        if r[(i, i)].abs() <= RANK_RTOL * lead {
            return Err(Error::Rank(format!(
                "relative pivot {:.3e} at column {i} below {RANK_RTOL:.0e}",
                r[(i, i)].abs() / lead
            )));
        }
    }
    let mut z = qr.q().transpose() * y;
    if !r.solve_upper_triangular_mut(&mut z) {
        return Err(Error::Numerical("triangular solve failed".into()));
    }
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

/// GLS fit of `y_q` on `X_q` under the residual shape `S_q`.
pub fn gls_estimate(
    y_q: &DVector<f64>,
    x_q: &DMatrix<f64>,
    s_q: &DMatrix<f64>,
) -> Result<GlsFit> {
    let factor = CovarianceFactor::from_spd(s_q.clone())?;
    gls_estimate_factored(y_q, x_q, &factor)
}

pub(crate) fn gls_estimate_factored(
    y_q: &DVector<f64>,
    x_q: &DMatrix<f64>,
    s_q: &CovarianceFactor,
) -> Result<GlsFit> {
    let n = y_q.len();
    if x_q.nrows() != n {
        return Err(Error::Shape(format!(
            "y has {n} rows but X has {}",
            x_q.nrows()
        )));
    }
    if s_q.size() != n {
        return Err(Error::Shape(format!(
            "covariance is {}x{} but y has {n} rows",
            s_q.size(),
            s_q.size()
        )));
    }
    let y_w = s_q.whiten_vector(y_q)?;
    let x_w = s_q.whiten_matrix(x_q)?;
    let beta = solve_least_squares(&x_w, &y_w)?;
    let residuals_low = y_q - x_q * &beta;
    let rss = (&y_w - &x_w * &beta).norm_squared();
    let tss = y_w.norm_squared();
    let (sigma2, loglik) = if rss <= EXACT_FIT_RTOL * tss + f64::MIN_POSITIVE {
        // exact fit: the scale estimate collapses; keep the fit usable
        (0.0, f64::INFINITY)
    } else {
        let sigma2 = rss / n as f64;
        (sigma2, profiled_loglik(n, sigma2, s_q.log_det()))
    };
    Ok(GlsFit {
        beta,
        rho: 0.0,
        sigma2,
        loglik,
        residuals_low,
    })
}

/// Log-likelihood with `sigma2` at its profiled value (the quadratic form
/// then contributes exactly `-n/2`).
fn profiled_loglik(n: usize, sigma2: f64, log_det: f64) -> f64 {
    let nf = n as f64;
    -0.5 * nf * ((2.0 * PI).ln() + sigma2.ln() + 1.0) - 0.5 * log_det
}

/// Gaussian log-likelihood of residuals under covariance `sigma2 * S_q`:
/// `-(n/2) log 2pi - (n/2) log sigma2 - (1/2) log|S_q|
///  - r^T S_q^{-1} r / (2 sigma2)`.
pub fn gaussian_loglik(residuals: &DVector<f64>, s_q: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
    let factor = CovarianceFactor::from_spd(s_q.clone())?;
    gaussian_loglik_factored(residuals, &factor, sigma2)
}

pub(crate) fn gaussian_loglik_factored(
    residuals: &DVector<f64>,
    s_q: &CovarianceFactor,
    sigma2: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let n = residuals.len();
    if s_q.size() != n {
        return Err(Error::Shape(format!(
            "covariance is {}x{} but residual vector has {n} entries",
            s_q.size(),
            s_q.size()
        )));
    }
    let quad = s_q.quad_form(residuals)?;
    let nf = n as f64;
    Ok(-0.5 * nf * (2.0 * PI).ln() - 0.5 * nf * sigma2.ln() - 0.5 * s_q.log_det()
        - 0.5 * quad / sigma2)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("rho grid is empty".into()));
    }
    for &rho in grid {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "rho grid value {rho} is outside (-1, 1)"
            )));
        }
    }
    Ok(())
}

/// Maximize the profiled Gaussian log-likelihood over a grid of `rho`
/// values. `builder` supplies the design and (factored) covariance at each
/// candidate. Ties go to the candidate with smaller `|rho|`.
pub fn profile_rho_search<F>(
    y_q: &DVector<f64>,
    grid: &[f64],
    builder: F,
) -> Result<(f64, GlsFit)>
where
    F: FnMut(f64) -> Result<(DMatrix<f64>, CovarianceFactor)>,
{
    let (rho, fit, _) = profile_rho_search_traced(y_q, grid, builder)?;
    Ok((rho, fit))
}

pub(crate) fn profile_rho_search_traced<F>(
    y_q: &DVector<f64>,
    grid: &[f64],
    mut builder: F,
) -> Result<(f64, GlsFit, Vec<RhoLoglik>)>
where
    F: FnMut(f64) -> Result<(DMatrix<f64>, CovarianceFactor)>,
{
    validate_grid(grid)?;
    let mut best: Option<(f64, GlsFit)> = None;
    let mut trace = Vec::with_capacity(grid.len());
    for &rho in grid {
        let (x_q, s_q) = builder(rho)?;
        let mut fit = gls_estimate_factored(y_q, &x_q, &s_q)?;
        fit.rho = rho;
        trace.push(RhoLoglik {
            rho,
            loglik: fit.loglik,
        });
        let take = match &best {
            None => true,
            Some((best_rho, best_fit)) => {
                fit.loglik > best_fit.loglik
                    || (fit.loglik == best_fit.loglik && rho.abs() < best_rho.abs())
            }
        };
        if take {
            best = Some((rho, fit));
        }
    }
    let (rho, fit) = best.expect("grid validated non-empty");
    Ok((rho, fit, trace))
}

/// The covariance shape a classical method profiles (or fixes).
fn classical_model(method: Method, rho: f64, p: usize) -> Result<CovarianceModel> {
    match method {
        Method::ChowLin => Ok(CovarianceModel::ar1(rho, p)),
        Method::Fernandez => Ok(CovarianceModel::fernandez(p)),
        Method::Litterman => Ok(CovarianceModel::litterman(rho, p)),
        Method::SpTd | Method::AdaptiveSpTd => Err(Error::Domain(format!(
            "{method} is a sparse method; call sp_td / adaptive_sp_td"
        ))),
    }
}

/// Distribute low-frequency residuals over the high-frequency axis:
/// `X_m beta + S_m C^T S_q^{-1} (y_q - X_q beta)`.
pub(crate) fn distribute(
    x_m: &DMatrix<f64>,
    beta: &DVector<f64>,
    residuals_low: &DVector<f64>,
    spec: &AggregationSpec,
    s_m: &DMatrix<f64>,
    s_q: &CovarianceFactor,
) -> Result<DVector<f64>> {
    let u = s_q.solve(residuals_low)?;
    let spread = spec.expand(&u)?;
    Ok(x_m * beta + s_m * spread)
}

/// Classical regression-based disaggregation (Chow-Lin, Fernandez or
/// Litterman). Requires fewer indicators than low-frequency observations.
pub fn disaggregate_classical(
    y_q: &DVector<f64>,
    panel: &IndicatorPanel,
    spec: &AggregationSpec,
    method: Method,
    grid: &[f64],
) -> Result<DisaggregationResult> {
    let x_m = panel.data();
    if y_q.len() != spec.n_low() {
        return Err(Error::Shape(format!(
            "benchmark series has {} entries but the aggregation expects n_low = {}",
            y_q.len(),
            spec.n_low()
        )));
    }
    if x_m.nrows() != spec.n_high() {
        return Err(Error::Shape(format!(
            "panel has {} rows but the aggregation expects n_high = {}",
            x_m.nrows(),
            spec.n_high()
        )));
    }
    let d = x_m.ncols();
    if d >= spec.n_low() {
        return Err(Error::DimensionRegime {
            n_low: spec.n_low(),
            d,
        });
    }
    // reject sparse methods up front
    classical_model(method, 0.0, 1)?;

    let x_q = spec.aggregate_matrix(x_m)?;
    let n_high = spec.n_high();

    let build = |rho: f64| -> Result<(DMatrix<f64>, CovarianceFactor)> {
        let s_m = classical_model(method, rho, n_high)?.shape()?;
        let s_q = CovarianceFactor::from_spd(spec.aggregate_cov(s_m.matrix())?)?;
        Ok((x_q.clone(), s_q))
    };

    let (rho_hat, fit, trace) = if method == Method::Fernandez {
        let (x, s) = build(0.0)?;
        let fit = gls_estimate_factored(y_q, &x, &s)?;
        let trace = vec![RhoLoglik {
            rho: 0.0,
            loglik: fit.loglik,
        }];
        (0.0, fit, trace)
    } else {
        profile_rho_search_traced(y_q, grid, build)?
    };

    // rebuild the winning shape for the distribution step
    let s_m = classical_model(method, rho_hat, n_high)?.shape()?;
    let s_q = CovarianceFactor::from_spd(spec.aggregate_cov(s_m.matrix())?)?;
    let y_high = distribute(x_m, &fit.beta, &fit.residuals_low, spec, s_m.matrix(), &s_q)?;

    let selected_columns = panel
        .names()
        .iter()
        .enumerate()
        .filter(|(j, _)| fit.beta[*j] != 0.0)
        .map(|(_, name)| name.clone())
        .collect();

    Ok(DisaggregationResult {
        y_high,
        fit: FitInfo::Gls(fit),
        method,
        spec: *spec,
        selected_columns,
        trace: Trace::RhoProfile(trace),
    })
}
