use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of a failure, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: `{field}` has {found} entries, expected {expected}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: `{field}` label must be 0 or 1, found {value}")]
    NonBinaryLabel {
        field: &'static str,
        row: usize,
        value: i64,
    },
    #[error("row {row}: group index {group} out of range (k = {k})")]
    GroupOutOfRange { row: usize, group: usize, k: usize },
    #[error("row {row}, column {column}: non-finite feature value")]
    NonFiniteFeature { row: usize, column: usize },
    #[error("gold labels are required but absent (missing column `gold`)")]
    MissingGold,
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("unknown instance id `{0}`")]
    UnknownId(String),
    #[error("training data contains only class {0}; both classes are required")]
    SingleClass(u8),
    #[error("class {class} has {count} instances, fewer than the {folds} folds requested")]
    ClassTooSmall {
        class: u8,
        count: usize,
        folds: usize,
    },
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("scope has no observed {0} instances; thresholds are undefined")]
    EmptyScope(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("aggregation needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("run {run} has metric keys differing from run 0")]
    HeterogeneousKeys { run: usize },
    #[error("seed {seed}, method {method}, stage {stage}: {source}")]
    Stage {
        seed: u64,
        method: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Usage,
            Error::NonFiniteLoss { .. } => ErrorKind::Numerical,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
