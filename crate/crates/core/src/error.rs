use thiserror::Error;

pub type Result<T> = std::result::Result<T, MtdError>;

#[derive(Debug, Error)]
pub enum MtdError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite value at position {position}")]
    NonFinite { position: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(&'static str),

    #[error("parse error at record {record} (line {line}): {message}")]
    Parse {
        record: usize,
        line: usize,
        message: String,
    },

    #[error("sample {position}: {source}")]
    AtSample {
        position: usize,
        #[source]
        source: Box<MtdError>,
    },

    #[error("chunk {chunk}: {source}")]
    AtChunk {
        chunk: usize,
        #[source]
        source: Box<MtdError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MtdError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MtdError::Config(msg.into())
    }

    pub(crate) fn at_sample(self, position: usize) -> Self {
        MtdError::AtSample {
            position,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_chunk(self, chunk: usize) -> Self {
        MtdError::AtChunk {
            chunk,
            source: Box::new(self),
        }
    }

    /// Strips position wrappers and returns the underlying error.
    pub fn root(&self) -> &MtdError {
        match self {
            MtdError::AtSample { source, .. } | MtdError::AtChunk { source, .. } => source.root(),
            other => other,
        }
    }
}
