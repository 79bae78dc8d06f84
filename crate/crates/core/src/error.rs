//! Error type shared across the library.

use thiserror::Error;

/// Failure modes surfaced by assembly, factorization, solves, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A factorization hit a zero pivot.
    #[error("factorization breakdown at row {row}: {reason}")]
    Breakdown { row: usize, reason: String },

    /// The conjugate-gradient direction test failed; the system is not
    /// symmetric positive definite.
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// An iterative solve ran out of iterations inside a time step.
    #[error("solver did not converge at step {step} ({iterations} iterations used)")]
    NotConverged { step: usize, iterations: usize },

    /// A config file or config value could not be interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// A named preset does not exist.
    #[error("unknown preset '{name}'; available: {available}")]
    UnknownPreset { name: String, available: String },

    /// Underlying file I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A text file (config or matrix dump) failed to parse.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
