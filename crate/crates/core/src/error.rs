use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("overflow: {0}")]
    Overflow(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("empty design: the sampling scheme selected no index tuples")]
    EmptyDesign,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing state: {0}")]
    State(String),

    #[error("degenerate variance estimate at coordinate {coord}")]
    DegenerateVariance { coord: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
