use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("table has missing values; preprocess it first")]
    MissingValues,

    #[error("empty after preprocessing")]
    EmptyAfterPreprocessing,

    #[error("non-positive denominator {value} in column `{column}` at row {row}")]
    NonPositiveDenominator { column: String, row: usize, value: f64 },

    #[error("arity mismatch: expected {expected} features, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("invalid hyperparameters: {0}")]
    HyperParams(String),

    #[error("model integrity: {0}")]
    ModelIntegrity(String),

    #[error("too many players ({0}) for exact enumeration (max 20); use tree_shap for tree models")]
    TooManyPlayers(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("surrogate ill-conditioned")]
    SurrogateIllConditioned,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
