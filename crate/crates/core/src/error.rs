use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("xml error at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("comment {comment_id}: unknown relevance label {value:?}")]
    UnknownLabel { comment_id: String, value: String },

    #[error("question {0} has no comments")]
    EmptyThread(String),

    #[error("invalid question {id:?}: {reason}")]
    InvalidQuestion { id: String, reason: String },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("{path}: line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch in {block}: expected {expected}, got {actual}")]
    Shape {
        block: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("{0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stream(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input or configuration rather than a
    /// failure inside the pipeline.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Stream(_))
    }
}
