//! Command-line surface for the disaggregation library: data ingestion,
//! correlation-based indicator filtering, the three subcommands
//! (`disaggregate`, `simulate`, `benchmark`) and result export.

pub mod commands;
pub mod error;
pub mod filter;
pub mod io;

pub use commands::{run, Cli};
pub use error::{CliError, EXIT_NUMERICAL, EXIT_VALIDATION};
