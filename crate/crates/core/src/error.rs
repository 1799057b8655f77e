use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nodes {from} and {to} are not connected")]
    Unreachable { from: usize, to: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}
