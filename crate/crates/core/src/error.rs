use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot load lexicon `{file}`: {reason}")]
    Lexicon { file: String, reason: String },

    /// The caller violated an operation's contract (wrong lexicon kind,
    /// empty input where one is required, index out of range, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("optimizer diverged: {0}")]
    Divergence(String),

    #[error("invalid UTF-8 at byte offset {offset}")]
    Utf8 { offset: usize },

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("malformed model file: {0}")]
    Format(String),

    #[error("character {0:?} is not covered by the vocabulary")]
    Encoding(char),

    #[error("word `{0}` is not in the vocabulary")]
    NotInVocabulary(String),

    #[error("cosine similarity is undefined for a zero-norm vector")]
    UndefinedSimilarity,

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Errors caused by how the library was called rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_))
    }
}
