use std::fmt;
use std::io;

/// Error type shared by all toolkit modules.
#[derive(Debug)]
pub enum Error {
    /// Tensor shapes incompatible with the requested operation.
    Shape { op: &'static str, detail: String },
    /// Invalid configuration or corpus/manifest contents.
    Config(String),
    /// A tensor or loss value became NaN/Inf.
    NonFinite { what: String },
    /// File format violation (tensor files, checkpoints, trial lists, ...).
    Format(String),
    /// An utterance or speaker id could not be resolved.
    MissingId(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    /// True for errors the CLI maps to exit code 2 (user input problems).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Format(_) | Error::MissingId(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "{op}: shape error: {detail}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::MissingId(id) => write!(f, "unknown id: {id}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
