use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {0:?} has no label")]
    UnlabeledRecord(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("training set contains a single class")]
    SingleClassTrainingSet,
    #[error("feature layout mismatch: expected {expected} slots, found {found}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("scores need at least one positive and one negative example")]
    SingleClassInput,
    #[error("the two classifiers never disagree (B + C = 0)")]
    NoDisagreement,
    #[error("all objects are classified identically by every classifier")]
    DegenerateAgreement,
    #[error("subset size {subset_size} exceeds {available} objects")]
    SubsetTooLarge { subset_size: usize, available: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Schema { .. } => "SchemaError",
            Error::DuplicateId(_) => "DuplicateId",
            Error::UnlabeledRecord(_) => "UnlabeledRecord",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidSplit(_) => "InvalidSplit",
            Error::SingleClassTrainingSet => "SingleClassTrainingSet",
            Error::LayoutMismatch { .. } => "LayoutMismatch",
            Error::CorpusTooSmall(_) => "CorpusTooSmall",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::SingleClassInput => "SingleClassInput",
            Error::NoDisagreement => "NoDisagreement",
            Error::DegenerateAgreement => "DegenerateAgreement",
            Error::SubsetTooLarge { .. } => "SubsetTooLarge",
            Error::Domain(_) => "DomainError",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Config(_) => "ConfigError",
            Error::ReplayMismatch(_) => "ReplayMismatch",
            Error::Json(_) => "JsonError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
