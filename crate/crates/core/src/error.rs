use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("point outside region: {0}")]
    OutsideRegion(String),
    #[error("isolating neighborhood too tight: {0}")]
    NeighborhoodTooTight(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate profile: {0}")]
    DegenerateProfile(String),
    #[error("epsilon too large: {0}")]
    EpsilonTooLarge(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
