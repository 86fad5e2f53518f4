use thiserror::Error;

/// Errors produced by the disaggregation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its mathematical domain (e.g. |rho| >= 1).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimensions of the supplied data do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A factorization or solve failed (non-positive pivot, ill-conditioning).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The (whitened) regression design is column-rank-deficient.
    #[error("rank error: {0}")]
    Rank(String),

    /// Too many regressors for a classical GLS fit; a sparse method is required.
    #[error(
        "dimension regime error: {d} indicators with only {n_low} low-frequency \
         observations; use a sparse method (spTD / adaptive-spTD)"
    )]
    DimensionRegime { n_low: usize, d: usize },

    /// The rho grid is empty or contains values outside (-1, 1).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two active design columns are (numerically) collinear.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
}

pub type Result<T> = std::result::Result<T, Error>;
