use std::path::PathBuf;

/// Errors produced by the scoring engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Chart JSON that is not well-formed JSON or does not match the wire shape.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// A well-formed document that violates an object invariant.
    #[error("validation error on `{object}` field `{field}`: {message}")]
    Validation {
        object: String,
        field: String,
        message: String,
    },

    /// An operation was called outside its preconditions.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The sandbox could not launch or supervise the runner at all.
    #[error("sandbox infrastructure error: {0}")]
    Infrastructure(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(
        object: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Validation {
            object: object.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
