use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Model,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("part count {0} out of range (exact enumeration supports 1..={max} parts)", max = crate::coalition::MAX_PARTS)]
    PartCountOutOfRange(usize),
    #[error("coalition size {size} out of range for {parts} parts")]
    SizeOutOfRange { size: usize, parts: usize },
    #[error("part index {index} out of range for {parts} parts")]
    PartIndexOutOfRange { index: usize, parts: usize },
    #[error("coalition {bits:#b} is not valid for {parts} parts")]
    InvalidCoalition { bits: u64, parts: usize },

    #[error("image is empty")]
    EmptyImage,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("unsupported image format: {0}")]
    UnsupportedImageFormat(String),
    #[error("box of part '{part}' is out of bounds for a {width}x{height} image")]
    BoxOutOfBounds {
        part: String,
        width: u32,
        height: u32,
    },
    #[error("invalid part annotation: {0}")]
    InvalidPart(String),

    #[error("evaluator unavailable: {0}")]
    EvaluatorUnavailable(String),
    #[error("malformed evaluator response: {0}")]
    MalformedResponse(String),
    #[error("evaluator returned a non-finite logit at position {0}")]
    NonFiniteLogit(usize),
    #[error("evaluator reported an error: {0}")]
    EvaluatorFailed(String),
    #[error("handshake failed: {0}")]
    HandshakeFailed(String),
    #[error("model reports {actual} classes, expected {expected}")]
    ClassCountMismatch { expected: usize, actual: usize },
    #[error("evaluation of batch item {index} failed: {source}")]
    BatchItem {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("invalid model spec '{0}'")]
    InvalidModelSpec(String),
    #[error("invalid model config: {0}")]
    ModelConfig(String),

    #[error("part count mismatch: expected {expected}, found {actual}")]
    PartCountMismatch { expected: usize, actual: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("annotation sources disagree: {0}")]
    VocabularyMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample '{0}' not found")]
    SampleNotFound(String),
    #[error("unknown class '{0}'")]
    UnknownClass(String),
    #[error("manifest error at line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            EvaluatorUnavailable(_)
            | MalformedResponse(_)
            | NonFiniteLogit(_)
            | EvaluatorFailed(_)
            | HandshakeFailed(_)
            | ClassCountMismatch { .. }
            | InvalidModelSpec(_)
            | ModelConfig(_) => ErrorKind::Model,
            BatchItem { source, .. } => source.kind(),
            Usage(_) | UnknownClass(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}
