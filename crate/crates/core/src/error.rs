//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while loading, synthesizing or splitting datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("target column {0:?} not found in header")]
    TargetMissing(String),
    #[error("column {0:?} mixes numeric and text cells")]
    MixedColumn(String),
    #[error("column {0:?} has no non-missing cells")]
    AllMissing(String),
    #[error("target column has a missing value at row {0}")]
    MissingTarget(usize),
    #[error("fewer than 2 classes in target column")]
    TooFewClasses,
    #[error("column count mismatch at row {0}")]
    RaggedRow(usize),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
}

/// Errors raised while deriving a pipeline blueprint from column profiles.
#[derive(Debug, Error)]
pub enum BlueprintError {
    #[error("no usable feature columns (all columns are identifiers)")]
    NoUsableFeatures,
}

/// A pipeline that could not be fitted or applied.
///
/// This is a value, not a crash: the search assigns worst fitness to
/// genomes whose pipeline fails.
#[derive(Debug, Clone, Error)]
#[error("pipeline failure: {reason}")]
pub struct PipelineFailure {
    pub reason: String,
}

impl PipelineFailure {
    pub fn new(reason: impl Into<String>) -> Self {
        Self {
            reason: reason.into(),
        }
    }
}

/// Errors raised by the search loop itself.
#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("no evaluations completed")]
    NoEvaluations,
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
}

/// Errors raised by the experiment harness.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("report error: {0}")]
    Report(String),
}
