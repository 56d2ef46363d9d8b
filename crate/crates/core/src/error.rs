use thiserror::Error;

use crate::oracle::QueryId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("scripted oracle exhausted after {answered} responses")]
    ScriptExhausted { answered: usize },

    #[error("query {got} is not pending{}", expected.map(|q| format!(" (current query is {q})")).unwrap_or_default())]
    UnknownQuery {
        got: QueryId,
        expected: Option<QueryId>,
    },

    #[error("query {0} was already answered with a different choice")]
    ConflictingResponse(QueryId),

    #[error("no query is pending: the run has finished")]
    Finished,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
