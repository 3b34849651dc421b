use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the classifier engine.
#[derive(Debug, Error)]
pub enum QmcError {
    #[error("shape mismatch: expected dimension {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("state vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },

    #[error("operator is not a Hermitian projector (defect {defect:e})")]
    NotAProjector { defect: f64 },

    #[error("input has no overlap with the training state (support {support:e})")]
    ZeroSupport { support: f64 },

    #[error("feature {feature} is constant over the data set")]
    DegenerateFeature { feature: usize },

    #[error("category {value} is outside 1..={categories}")]
    InvalidCategory { value: f64, categories: usize },

    #[error("encoded vector has zero norm")]
    ZeroVector,

    #[error("superposition of training states cancels exactly")]
    DegenerateSuperposition,

    #[error("no training samples were absorbed")]
    EmptyTraining,

    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported input dimension {0}; a 2-feature model is required")]
    UnsupportedDimension(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid model file: {0}")]
    Model(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = QmcError> = std::result::Result<T, E>;

impl QmcError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QmcError::Io {
            path: path.into(),
            source,
        }
    }
}
