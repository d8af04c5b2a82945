//! Error type shared by all modules.

use thiserror::Error;

/// Error returned by constructors, bound evaluators, and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented domain (wrong sign, NaN, ...).
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Parameters are individually valid but the requested configuration
    /// has no solution (e.g. a blocklength too short for the thresholds).
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// Malformed command-line input (bad grid syntax, missing flag, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Usage(_) | Error::Io(_) => 1,
            Error::Infeasible(_) => 2,
        }
    }
}
