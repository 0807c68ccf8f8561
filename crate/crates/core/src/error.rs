use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed data file. `line` is 1-based; 0 when the problem is not tied to a line.
    #[error("data error (line {line}): {msg}")]
    Data { line: usize, msg: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn data(line: usize, msg: impl Into<String>) -> Self {
        Error::Data { line, msg: msg.into() }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Config(_) => 1,
            Error::Data { .. } | Error::Io(_) | Error::Json(_) => 2,
            Error::Numeric(_) | Error::DegenerateKernel(_) | Error::Infeasible(_) | Error::InvalidSelection(_) => 3,
            Error::Verification(_) => 4,
        }
    }
}
