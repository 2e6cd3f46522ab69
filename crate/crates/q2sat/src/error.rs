//! Crate-wide error type.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed caller input (bad dimensions, zero vectors, out-of-range ids, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation was called on data that violates its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A hard size cap was exceeded (oracle qubit cap, materialization cap).
    #[error("resource cap exceeded: {what} requires {required}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        required: String,
        cap: String,
    },

    /// Basis materialization was requested but the ground space is too large.
    /// Carries the exact dimension so callers still learn the answer.
    #[error("ground-space dimension {dimension} exceeds basis cap {cap}")]
    BasisCapExceeded { dimension: BigUint, cap: u64 },

    /// Instance file could not be parsed.
    #[error("parse error{}: {msg}", path.as_deref().map(|p| format!(" in {p}")).unwrap_or_default())]
    Parse { path: Option<String>, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
