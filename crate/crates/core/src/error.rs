use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped by what went wrong rather than by module so that the
/// command-line front end can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument error: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error in {op}: expected {expected:?}, got {got:?}")]
    Shape {
        op: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("state error: {0}")]
    State(String),

    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("checkpoint error in field `{field}`: {message}")]
    Checkpoint { field: String, message: String },

    #[error("training error at step {step}: {message}")]
    Training { step: u64, message: String },

    #[error("test error: {0}")]
    Test(String),

    #[error("{source_id}: {inner}")]
    Source {
        source_id: String,
        #[source]
        inner: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(op: impl Into<String>, expected: &[usize], got: &[usize]) -> Self {
        Error::Shape {
            op: op.into(),
            expected: expected.to_vec(),
            got: got.to_vec(),
        }
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn checkpoint(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Checkpoint {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach the identifier of the input that produced this error.
    pub fn with_source(self, source_id: impl Into<String>) -> Self {
        Error::Source {
            source_id: source_id.into(),
            inner: Box::new(self),
        }
    }

    /// The innermost error, skipping any source annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Source { inner, .. } => inner.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
