use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{message} at line {line}")]
    Parse { line: usize, message: String },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("invalid sample `{id}`: {reason}")]
    InvalidSample { id: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training split is empty")]
    EmptyTrainingSplit,

    #[error("scorer failed on sample `{sample}` variant {variant}: {source}")]
    Erasure {
        sample: String,
        /// 0 is the full document, j >= 1 is the document with sentence j erased
        variant: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("external scorer: {message} (exchange: {exchange})")]
    Protocol { message: String, exchange: String },

    #[error("epoch mismatch between stores: {0}")]
    EpochMismatch(String),

    #[error("no evidence for sample `{0}`")]
    MissingEvidence(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
