//! Residual covariance shapes for the disaggregation regressions.
//!
//! All shapes are built with the innovation scale factored out: the residual
//! covariance is `V = sigma^2 * S` and only the unit-scale matrix `S` is
//! constructed here. This lets the likelihood concentrate `sigma^2`
//! analytically instead of searching over a second parameter.
//!
//! Three shapes are supported:
//!
//! * AR(1): `S[i,j] = rho^|i-j| / (1 - rho^2)`, the stationary
//!   autoregression used by the Chow-Lin method;
//! * random walk (Fernandez): `S = (D^T D)^{-1}` with `D` the first
//!   difference operator, for residuals that are not cointegrated with the
//!   indicators;
//! * random walk-Markov (Litterman): `S = (D^T H^T H D)^{-1}` where `H`
//!   applies an AR(1) filter to the differenced residuals.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot floor for the Cholesky factorization; anything at or below this is
/// treated as a failure rather than silently regularized.
const PIVOT_TOL: f64 = 1e-12;

/// Family of a residual covariance shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceKind {
    /// Stationary AR(1) Toeplitz shape (Chow-Lin).
    Ar1,
    /// Random-walk shape (Fernandez); has no autocorrelation parameter.
    Fernandez,
    /// Random-walk-Markov shape (Litterman).
    Litterman,
}

impl CovarianceKind {
    pub fn uses_rho(&self) -> bool {
        !matches!(self, CovarianceKind::Fernandez)
    }
}

/// A covariance shape request: family, autocorrelation and dimension.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    /// Ignored for [`CovarianceKind::Fernandez`].
    pub rho: f64,
    pub size: usize,
}

impl CovarianceModel {
    pub fn ar1(rho: f64, size: usize) -> Self {
        Self {
            kind: CovarianceKind::Ar1,
            rho,
            size,
        }
    }

    pub fn fernandez(size: usize) -> Self {
        Self {
            kind: CovarianceKind::Fernandez,
            rho: 0.0,
            size,
        }
    }

    pub fn litterman(rho: f64, size: usize) -> Self {
        Self {
            kind: CovarianceKind::Litterman,
            rho,
            size,
        }
    }

    /// Build the shape matrix and its factorization.
    pub fn shape(&self) -> Result<CovarianceFactor> {
        match self.kind {
            CovarianceKind::Ar1 => build_ar1_shape(self.rho, self.size),
            CovarianceKind::Fernandez => build_fernandez_shape(self.size),
            CovarianceKind::Litterman => build_litterman_shape(self.rho, self.size),
        }
    }
}

/// A symmetric positive-definite shape matrix with its lower Cholesky factor
/// and log-determinant.
#[derive(Clone, Debug)]
pub struct CovarianceFactor {
    matrix: DMatrix<f64>,
    lower_cholesky: DMatrix<f64>,
    log_det: f64,
}

impl CovarianceFactor {
    /// Factor a symmetric positive-definite matrix.
    pub fn from_spd(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Shape(format!(
                "covariance matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let lower_cholesky = cholesky_lower(&matrix)?;
        let log_det = 2.0 * lower_cholesky.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            matrix,
            lower_cholesky,
            log_det,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn lower_cholesky(&self) -> &DMatrix<f64> {
        &self.lower_cholesky
    }

    /// `log |S|`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `L^{-1} v`, the whitening transform.
    pub fn whiten_vector(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.lower_cholesky
            .solve_lower_triangular(v)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
    }

    /// `L^{-1} M`, whitening every column of `M`.
    pub fn whiten_matrix(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lower_cholesky
            .solve_lower_triangular(m)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
    }

    /// Quadratic form `r^T S^{-1} r`.
    pub fn quad_form(&self, r: &DVector<f64>) -> Result<f64> {
        Ok(self.whiten_vector(r)?.norm_squared())
    }

    /// `S^{-1} b` via forward and backward substitution.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let half = self.whiten_vector(b)?;
        self.lower_cholesky
            .tr_solve_lower_triangular(&half)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))
    }
}

/// Textbook lower Cholesky with an explicit pivot check.
fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    let mut l = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > PIVOT_TOL) {
            return Err(Error::Numerical(format!(
                "Cholesky pivot {d:.3e} at index {j} is not positive; \
                 matrix is not (numerically) positive-definite"
            )));
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Ok(l)
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "autocorrelation must satisfy |rho| < 1, got {rho}"
        )));
    }
    Ok(())
}

fn check_size(p: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::Domain("shape dimension must be at least 1".into()));
    }
    Ok(())
}

/// Stationary AR(1) shape: `S[i,j] = rho^|i-j| / (1 - rho^2)`.
pub fn build_ar1_shape(rho: f64, p: usize) -> Result<CovarianceFactor> {
    check_rho(rho)?;
    check_size(p)?;
    let scale = 1.0 / (1.0 - rho * rho);
    // lag powers up front; the Toeplitz fill is then pure indexing
    let mut powers = vec![0.0; p];
    powers[0] = 1.0;
    for k in 1..p {
        powers[k] = powers[k - 1] * rho;
    }
    let s = DMatrix::from_fn(p, p, |i, j| scale * powers[i.abs_diff(j)]);
    CovarianceFactor::from_spd(s)
}

/// Random-walk shape `(D^T D)^{-1}`.
pub fn build_fernandez_shape(p: usize) -> Result<CovarianceFactor> {
    check_size(p)?;
    let precision = walk_precision(0.0, p);
    let s = invert_precision(&precision)?;
    CovarianceFactor::from_spd(s)
}

/// Random-walk-Markov shape `(D^T H^T H D)^{-1}` with `H` carrying `-rho` on
/// its first subdiagonal.
pub fn build_litterman_shape(rho: f64, p: usize) -> Result<CovarianceFactor> {
    check_rho(rho)?;
    check_size(p)?;
    let precision = walk_precision(rho, p);
    let s = invert_precision(&precision)?;
    CovarianceFactor::from_spd(s)
}

/// `(H D)^T (H D)` built from the band structure of `H D` directly.
///
/// `D` differences, `H` filters the differences; their product is lower
/// banded with diagonal 1, first subdiagonal `-(1 + rho)` and second
/// subdiagonal `rho`. Forming the precision this way avoids ever inverting
/// the (nearly singular) difference operator.
fn walk_precision(rho: f64, p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        m[(i, i)] = 1.0;
        if i >= 1 {
            m[(i, i - 1)] = -(1.0 + rho);
        }
        if i >= 2 {
            m[(i, i - 2)] = rho;
        }
    }
    m.transpose() * m
}

/// Solve `P * S = I` through the Cholesky factor of the precision `P`.
fn invert_precision(precision: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = precision.nrows();
    let l = cholesky_lower(precision)?;
    let eye = DMatrix::identity(p, p);
    let half = l
        .solve_lower_triangular(&eye)
        .ok_or_else(|| Error::Numerical("singular precision factor".into()))?;
    let mut s = l
        .tr_solve_lower_triangular(&half)
        .ok_or_else(|| Error::Numerical("singular precision factor".into()))?;
    // enforce exact symmetry against round-off drift
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = avg;
            s[(j, i)] = avg;
        }
    }
    Ok(s)
}
