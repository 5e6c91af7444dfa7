use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    /// A value outside the domain of an operation. `line` is set when the
    /// value came from an input file.
    #[error("{}{message}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Domain { line: Option<u64>, message: String },
    #[error("degenerate day: {0}")]
    DegenerateDay(String),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("need at least {needed} trading days, got {got}")]
    TooFewDays { needed: usize, got: usize },
    #[error("need at least {needed} rate pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain { line: None, message: message.into() }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), message: err.to_string() }
    }
}
