//! Batch front end for the `crosscal` library.
//!
//! Every subcommand reads its inputs from flags, writes a JSON report to
//! `<out>.json` and table or plot data to `<out>.csv`, and prints a one-line
//! summary. Forecaster indices are 1-based on the command line and in all
//! output files.

use std::fmt;

pub mod app;
pub mod ingest;
pub mod schema;

pub use app::{run, Cli};
pub use ingest::{dump_csv, ingest_csv, ingest_str, IngestConfig};

/// Exit status for input errors.
pub const EXIT_INPUT: i32 = 1;
/// Exit status for statistical degeneracy (singular covariance and the like).
pub const EXIT_DEGENERATE: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Stat(crosscal::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stat(e) if e.is_degenerate() => EXIT_DEGENERATE,
            _ => EXIT_INPUT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::Stat(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<crosscal::Error> for CliError {
    fn from(e: crosscal::Error) -> Self {
        CliError::Stat(e)
    }
}
