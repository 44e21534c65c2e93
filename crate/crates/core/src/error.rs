//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by mesh construction, assembly, factorization, time
/// stepping and the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or solver argument is out of its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Dimensions of vectors/matrices passed together do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A quantity that must be strictly positive (or finite) is not.
    #[error("invalid value: {0}")]
    InvalidValue(String),

    /// An LU factorization hit an exactly singular pivot.
    #[error("singular matrix: zero pivot at index {index}")]
    SingularMatrix { index: usize },

    /// A Cholesky factorization found a non-positive diagonal.
    #[error("matrix is not positive definite: nonpositive pivot at index {index}")]
    NotPositiveDefinite { index: usize },

    /// An iterative method exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A time-stepping run produced a non-finite or explosively growing state.
    #[error("solution blow-up detected at step {step} (energy {energy:e})")]
    BlowUp { step: usize, energy: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand for [`Error::InvalidArgument`] from format-style inputs.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
