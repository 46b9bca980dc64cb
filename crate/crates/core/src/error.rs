//! Error type shared by every module of the workbench.

use thiserror::Error;

/// Errors raised by the numerical routines and the command-line driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagError {
    /// A scalar argument violates its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Name of the offending argument.
        name: &'static str,
        /// Human readable explanation.
        reason: String,
    },

    /// A Laguerre or spinor index lies outside the representable range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// Two operands were built with different magnetic lengths.
    #[error("mismatched magnetic length: {left} vs {right}")]
    MismatchedParams {
        /// Magnetic length of the left operand.
        left: f64,
        /// Magnetic length of the right operand.
        right: f64,
    },

    /// A spectrum stream ran out before the requested number of values.
    #[error("spectrum exhausted: requested {requested} values, {available} available")]
    SpectrumExhausted {
        /// Number of singular values requested.
        requested: usize,
        /// Number of singular values the stream can supply.
        available: usize,
    },

    /// An iterative numerical kernel failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A truncated operator is too small relative to the requested depth.
    #[error("truncation too small: dimension {dimension} for N_max = {n_max}")]
    TruncationTooSmall {
        /// Dimension of the truncated operator.
        dimension: usize,
        /// Requested number of singular values.
        n_max: usize,
    },

    /// Malformed configuration or serialized input.
    #[error("configuration error: {0}")]
    Config(String),

    /// File system failure while writing a report.
    #[error("i/o error: {0}")]
    Io(String),
}

impl MagError {
    /// Shorthand for [`MagError::InvalidParameter`].
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        MagError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for MagError {
    fn from(e: std::io::Error) -> Self {
        MagError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for MagError {
    fn from(e: serde_json::Error) -> Self {
        MagError::Config(e.to_string())
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, MagError>;
