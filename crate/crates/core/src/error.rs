// SPDX-License-Identifier: MIT
//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by construction, assembly, solving and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or vector shapes do not chain.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: String,
        got: String,
    },
    /// A scalar or matrix parameter violates its precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// The requested mode is outside the supported protocol.
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// A rollout left the blow-up guard.
    #[error("divergence at step {step}: state norm {norm:e}")]
    Divergence { step: usize, norm: f64 },
    /// The conic solver could not be set up.
    #[error("solver: {0}")]
    Solver(String),
    /// Configuration document rejected.
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(what: &str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        what: what.to_string(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
