// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module in the crate.

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Soft-thresholding removed every entry of the CUSUM matrix, so no
    /// projection direction is estimable. Callers should either lower the
    /// regularisation level or treat the data as containing no detectable
    /// change.
    #[error("threshold too large: soft-thresholded matrix is identically zero")]
    ThresholdTooLarge,

    /// A numerical routine failed to produce a usable result.
    #[error("solver failure: {0}")]
    Solver(String),

    /// An enumeration would exceed the configured combinatorial budget.
    #[error("combinatorial guard exceeded: {0}")]
    CombinatorialGuard(String),
}

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
