use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("loss must be a 1x1 node, got {0:?}")]
    NonScalarLoss((usize, usize)),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("{0}: no rows left")]
    EmptyDataset(String),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("label column `{0}` has a single class")]
    SingleClass(String),

    #[error("label value `{0}` was not seen when the encoder was fitted")]
    UnseenLabel(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("dimension mismatch: {what} expects {expected}, got {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("unsupported format version `{found}` (expected `{expected}`)")]
    Version { expected: String, found: String },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("search space is empty")]
    EmptySearchSpace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
