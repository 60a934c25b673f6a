use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("statistics undefined: {0}")]
    UndefinedStatistics(String),
    #[error("zero-probability event: {0}")]
    ZeroProbability(String),
    #[error("state space too large: {0}")]
    StateSpace(String),
    #[error("no root of the tail-bound equation: {0}")]
    NoRoot(String),
    #[error("bound diverges: {0}")]
    InfiniteBound(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("probability {value} out of range by more than tolerance ({what})")]
    OutOfRange { what: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
