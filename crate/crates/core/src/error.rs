use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate {class} id `{id}`")]
    DuplicateId { class: &'static str, id: String },

    #[error("{path}:{line}: unresolved {class} id `{id}`")]
    UnresolvedId {
        path: PathBuf,
        line: u64,
        class: &'static str,
        id: String,
    },

    #[error("{path}:{line}: unknown relation tag `{tag}` (expected pm, pd or md)")]
    UnknownRelation { path: PathBuf, line: u64, tag: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("block `{block}` has shape {found:?}, expected {expected:?}")]
    BlockShape {
        block: &'static str,
        found: (usize, usize),
        expected: (usize, usize),
    },

    #[error("index out of range: {0}")]
    Index(String),

    #[error(
        "negative pool exhausted: need {needed} unobserved peptide-disease cells, only {available} exist"
    )]
    NegativePoolExhausted { needed: usize, available: usize },

    #[error("unsupported or corrupt {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
