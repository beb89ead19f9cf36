//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A caller-supplied value violates an operation's contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration-level inconsistency (wrong mesh state, incompatible
    /// artifacts, missing boundary data).
    #[error("configuration error: {0}")]
    Config(String),

    /// A linear solve failed or did not reach its tolerance.
    #[error("solver error: {message}{}", residual.map(|r| format!(" (achieved residual {r:.3e})")).unwrap_or_default())]
    Solver {
        message: String,
        /// Relative residual actually achieved, when the solver got that far.
        residual: Option<f64>,
    },

    /// A numerical result is unusable (non-finite entries, failed eigensolve).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A persisted artifact does not match what the caller expects.
    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),
}

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
