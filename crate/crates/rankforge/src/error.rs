//! Error types shared across the crate.
//!
//! Three broad classes matter to callers (and map onto distinct process
//! exit codes in the CLI): configuration problems, data problems, and
//! numeric failures at run time.  Programmer-contract violations (shape
//! mismatches, out-of-range indices) panic instead — they are bugs, not
//! runtime conditions.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: unknown loss string, bad architecture code,
    /// empty cutoff list, inconsistent flags.
    #[error("config error: {0}")]
    Config(String),

    /// Invalid or unusable input data: parse failures (with file/line
    /// context), empty datasets, dimension mismatches against a checkpoint.
    #[error("data error: {0}")]
    Data(String),

    /// Numeric failure at run time: non-finite scores, losses, or
    /// gradients.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Underlying I/O failure (checkpoint or report files, dataset reads).
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
