use thiserror::Error;

use crate::constraints::ConsistencyReport;
use crate::table::VarId;

/// Errors produced by table, constraint, and solver operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("table has zero total mass")]
    ZeroMass,

    #[error("unknown variable {0}")]
    UnknownVariable(VarId),

    #[error("conditioning event has zero probability")]
    ConditioningOnNullEvent,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("pair coverage: {0}")]
    PairCoverage(String),

    #[error("inconsistent constraint system: {0}")]
    Consistency(Box<ConsistencyReport>),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
