use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("column `{column}` appears in more than one role")]
    OverlappingColumns { column: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("no labeled rows")]
    NoLabeledRows,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labels must be in {{0, 1}}")]
    NonBinaryLabels,
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("no eligible atom in the {0} dictionary")]
    NoEligibleAtom(&'static str),
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("fitter failed: {0}")]
    Fitter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
