//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument left the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A curve evaluator was asked for a value exactly at a pole.
    #[error("generalization error diverges at alpha = {alpha}")]
    Pole { alpha: f64 },

    /// A statistic could not be formed (e.g. zero variance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Configuration rejected before running anything.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
