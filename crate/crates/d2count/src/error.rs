//! Error type shared by every stage of the pipeline.
//!
//! Each variant maps onto one CLI exit code, so library callers and the
//! command-line front end agree on what kind of failure occurred.

use thiserror::Error;

/// Errors raised by the counting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (polynomial files, edge lists, numbers, config).
    #[error("parse error: {0}")]
    Parse(String),
    /// The caller violated an operation's documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// The requested accuracy or size would exceed the configured budget.
    #[error("infeasible request: {0}")]
    Feasibility(String),
    /// An internal invariant did not hold; indicates a bug.
    #[error("internal invariant failed: {0}")]
    Internal(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the `d2count` binary for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Precondition(_) => 3,
            Error::Feasibility(_) => 4,
            Error::Internal(_) => 1,
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
