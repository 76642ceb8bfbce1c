//! Error type shared across the toolkit.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, IsacError>;

/// Failure modes surfaced by the toolkit.
///
/// Config errors carry the JSON field path that failed validation so a bad
/// scenario file points at the offending entry, not just the file.
#[derive(Debug, Error)]
pub enum IsacError {
    /// Scenario or experiment config rejected during validation.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// Argument outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Operands whose shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Constraint set admits no solution at the requested thresholds.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A numeric routine failed to converge or hit a singular system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl IsacError {
    /// Config error pinned to a JSON field path such as `targets[1].delay_bin`.
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        IsacError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        IsacError::Domain(message.into())
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        IsacError::Dimension(message.into())
    }

    pub fn infeasible(message: impl Into<String>) -> Self {
        IsacError::Infeasible(message.into())
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        IsacError::Numerical(message.into())
    }
}
