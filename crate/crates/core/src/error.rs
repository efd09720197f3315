//! Error taxonomy shared by every module.
//!
//! Three broad categories matter to callers (the CLI maps them to exit
//! codes): input validation, size/budget guards, and certification failures
//! (a requested bound could not be established).

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum GraphLdpError {
    /// Malformed or inconsistent input (bad graph, law not a probability
    /// vector, mismatched mark spaces, out-of-range parameter).
    #[error("validation: {0}")]
    Validation(String),

    /// A hard size cap or work budget was exceeded.
    #[error("budget: {0}")]
    Budget(String),

    /// A certified bound could not be established (remainder mass too
    /// large, truncation insufficient, registration cross-check failed).
    #[error("certification: {0}")]
    Certification(String),

    /// Numeric breakdown at runtime (divergent trajectory, non-finite
    /// value where a finite one is required).
    #[error("numeric: {0}")]
    Numeric(String),
}

impl GraphLdpError {
    pub fn validation(msg: impl Into<String>) -> Self {
        GraphLdpError::Validation(msg.into())
    }
    pub fn budget(msg: impl Into<String>) -> Self {
        GraphLdpError::Budget(msg.into())
    }
    pub fn certification(msg: impl Into<String>) -> Self {
        GraphLdpError::Certification(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        GraphLdpError::Numeric(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, GraphLdpError>;
