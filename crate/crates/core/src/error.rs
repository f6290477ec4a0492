use thiserror::Error;

use crate::dsl::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("space `{space}` produced a non-finite value {value} at {at}")]
    InvalidSpace { space: String, value: f64, at: String },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("sequence term {index}: {source}")]
    Term {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown space `{0}`")]
    UnknownSpace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
