use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid job {index}: {reason}")]
    InvalidJob { index: usize, reason: &'static str },

    #[error("instance must contain at least one job")]
    EmptyInstance,

    #[error("not a permutation of 0..{n}: {reason}")]
    NotAPermutation { n: usize, reason: String },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("reference table: {0}")]
    Reference(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trace does not record iteration-best schedules")]
    MissingSchedules,

    #[error("trace is truncated: expected {expected} iterations, found {found}")]
    TruncatedTrace { expected: usize, found: usize },

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
