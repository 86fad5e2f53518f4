use std::path::PathBuf;

use thiserror::Error;

/// Exit code for configuration, parsing and dimension problems.
pub const EXIT_VALIDATION: u8 = 2;
/// Exit code for numerical failures (factorizations, rank, collinearity).
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] disagg_core::Error),

    #[error("parse error in {path} at line {line}{}: {message}",
        column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(
                disagg_core::Error::Numerical(_)
                | disagg_core::Error::Rank(_)
                | disagg_core::Error::DegenerateDesign(_),
            ) => EXIT_NUMERICAL,
            _ => EXIT_VALIDATION,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => match e {
                disagg_core::Error::Domain(_) => "domain",
                disagg_core::Error::Shape(_) => "shape",
                disagg_core::Error::Numerical(_) => "numerical",
                disagg_core::Error::Rank(_) => "rank",
                disagg_core::Error::DimensionRegime { .. } => "dimension-regime",
                disagg_core::Error::InvalidGrid(_) => "invalid-grid",
                disagg_core::Error::DegenerateDesign(_) => "degenerate-design",
            },
            CliError::Parse { .. } => "parse",
            CliError::Shape(_) => "shape",
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
        }
    }

    /// Machine-readable error record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
