use thiserror::Error;

/// Errors produced by the simulator building blocks.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("buffer is empty")]
    EmptyBuffer,
    #[error("buffer too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("sample {index} has zero magnitude; phase is undefined")]
    ZeroMagnitude { index: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    RateMismatch { a: f64, b: f64 },
    #[error("passband rate {rate} Hz cannot represent a carrier at {carrier} Hz with {bandwidth} Hz of bandwidth")]
    Nyquist {
        carrier: f64,
        bandwidth: f64,
        rate: f64,
    },
    #[error("expected {expected} payload bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("receiver is not synchronized")]
    NotSynchronized,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
