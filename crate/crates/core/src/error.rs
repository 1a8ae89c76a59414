use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate code {0:?}")]
    DuplicateCode(String),

    #[error("duplicate division {name:?} under parent {parent:?}")]
    DuplicateName { name: String, parent: Option<String> },

    #[error("record {code:?} references missing parent {parent:?}")]
    DanglingParent { code: String, parent: String },

    #[error("record {code:?}: {message}")]
    InvalidRecord { code: String, message: String },

    #[error("broken parent chain at {0:?}")]
    BrokenChain(String),

    #[error("path is already complete at level 3")]
    PathComplete,

    #[error("token {0:?} is not in the vocabulary")]
    OutOfVocabulary(String),

    #[error("vocabulary has {0} token(s); at least 2 are required")]
    VocabularyTooSmall(usize),

    #[error("training diverged at epoch {epoch}: objective is {value}")]
    Diverged { epoch: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("document ids do not align: {0}")]
    Misaligned(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
