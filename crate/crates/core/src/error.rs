use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: invalid UTF-8 byte sequence")]
    InvalidUtf8 { line: usize },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("empty evaluation set")]
    EmptyEvaluationSet,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("segmentation of `{word}` does not concatenate back to the word")]
    SegmentationMismatch { word: String },

    #[error("dangling continuation: token stream starts with a non-initial subword")]
    DanglingContinuation,

    #[error("inventory too small: target {target} must exceed the alphabet size {alphabet}")]
    InventoryTooSmall { target: usize, alphabet: usize },

    #[error("inconsistent model state: {0}")]
    Inconsistent(String),

    #[error("ARPA line {line}: {message}")]
    Arpa { line: usize, message: String },

    #[error("budget of {budget} bytes is below the unigram skeleton size of {skeleton} bytes")]
    BudgetTooSmall { budget: u64, skeleton: u64 },

    #[error("mismatched model orders: {0} vs {1}")]
    OrderMismatch(usize, usize),

    #[error("component models do not share a vocabulary")]
    VocabularyMismatch,

    #[error("sequence model contract violated: {0}")]
    ContractViolation(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the data handed in (malformed files, empty
    /// sets, inconsistent counts) as opposed to caller misuse.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::InvalidArgument(_) | Error::InventoryTooSmall { .. } | Error::BudgetTooSmall { .. }
        )
    }
}
