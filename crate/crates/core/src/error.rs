use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: u64 },

    #[error("empty sentence")]
    EmptySentence,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unsupported version header {found:?} (expected SPANDICT v1)")]
    Version { line: usize, found: String },

    #[error("record {record}: {message}")]
    Validation { record: usize, message: String },

    #[error("alignment mismatch: {0}")]
    Alignment(String),

    #[error("no valid spans")]
    EmptySpans,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("forward cache error: {0}")]
    Cache(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated input: {0}")]
    Length(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attaches the file an error was raised for.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        match self {
            already @ Error::File { .. } => already,
            other => Error::File {
                path: path.into(),
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, looking through file context.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for errors caused by bad arguments rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self.root(), Error::Argument(_))
    }
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
