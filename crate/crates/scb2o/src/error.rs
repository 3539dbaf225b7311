use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by solvers, dynamics, diagnostics, and configuration.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric precondition on an input was violated (non-finite value,
    /// empty sample set, parameter out of range).
    #[error("domain error: {0}")]
    Domain(String),

    /// A run or CLI configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { residual: f64, iterations: usize },

    /// The particle system produced a non-finite value.
    #[error("divergence at step {step}, particle {particle}: {message}")]
    Divergence {
        step: usize,
        particle: usize,
        message: String,
    },

    /// A mathematical invariant that the implementation must uphold was
    /// observed to fail; this always signals a bug, never bad user input.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
