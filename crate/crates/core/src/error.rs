use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty sample vector")]
    EmptySamples,

    #[error("column `{0}` not present in trace header")]
    MissingColumn(String),

    #[error("singular local regression system: {0}")]
    Singular(&'static str),

    #[error("utilization window is empty")]
    EmptyWindow,

    #[error("observation stream out of order: {0}")]
    OutOfOrder(String),

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True when the failure stems from the caller's arguments rather than
    /// from the data or the environment.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}
