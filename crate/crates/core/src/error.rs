//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A single malformed record, outside any file context.
    #[error("bad record {content:?}: {message}")]
    Record { message: String, content: String },

    /// A malformed line inside a file; `line` is 1-based.
    #[error("{}:{line}: {message}", path.display())]
    File {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid grid file: {0}")]
    Grid(String),

    #[error("invalid model file: {0}")]
    Model(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
