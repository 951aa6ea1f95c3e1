use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// `id()` gives a stable identifier used by the command line front end as the
/// prefix of its one-line diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { value: f64, row: usize, col: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("bad fold count: V={v} with n={n} (need 2 <= V <= n)")]
    BadFoldCount { v: usize, n: usize },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid hyperparameter for {kind}: {reason}")]
    InvalidHyperparameter { kind: String, reason: String },
    #[error("invalid learner library: {0}")]
    InvalidLibrary(String),
    #[error("fit failure in {kind}: {reason}")]
    FitFailure { kind: String, reason: String },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("degenerate response: total sum of squares is zero")]
    DegenerateResponse,
    #[error("all learners failed: {0}")]
    AllLearnersFailed(String),
    #[error("reference learner '{0}' missing")]
    MissingReference(String),
    #[error("reference learner '{0}' has zero CV-MSE")]
    ZeroReference(String),
    #[error("non-positive value {0} in geometric mean")]
    NonPositive(f64),
    #[error("bad simulation id {0} (expected 1..=4)")]
    BadSimId(u8),
    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },
    #[error("missing cell at row {row}, column {col}")]
    MissingCell { row: usize, col: usize },
    #[error("target column '{0}' not found")]
    TargetMissing(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("column mismatch: {0}")]
    ColumnMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub fn id(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "NonFinite",
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::BadFoldCount { .. } => "BadFoldCount",
            Error::Empty(_) => "Empty",
            Error::InvalidHyperparameter { .. } => "InvalidHyperparameter",
            Error::InvalidLibrary(_) => "InvalidLibrary",
            Error::FitFailure { .. } => "FitFailure",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::DegenerateResponse => "DegenerateResponse",
            Error::AllLearnersFailed(_) => "AllLearnersFailed",
            Error::MissingReference(_) => "MissingReference",
            Error::ZeroReference(_) => "ZeroReference",
            Error::NonPositive(_) => "NonPositive",
            Error::BadSimId(_) => "BadSimId",
            Error::ParseError { .. } => "ParseError",
            Error::MissingCell { .. } => "MissingCell",
            Error::TargetMissing(_) => "TargetMissing",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::ColumnMismatch(_) => "ColumnMismatch",
            Error::Config(_) => "Config",
            Error::Serialization(_) => "Serialization",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn fit(kind: &str, reason: impl Into<String>) -> Self {
        Error::FitFailure { kind: kind.to_string(), reason: reason.into() }
    }

    pub(crate) fn hyper(kind: &str, reason: impl Into<String>) -> Self {
        Error::InvalidHyperparameter { kind: kind.to_string(), reason: reason.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
