use thiserror::Error;

/// Errors raised anywhere in the testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: column `{0}` not found in header")]
    SchemaMismatch(String),

    #[error("row {row}: treatment value {value} is not 0 or 1")]
    NonBinaryTreatment { row: usize, value: String },

    #[error("row {row}, column `{column}`: non-finite or unparseable value `{value}`")]
    NonFiniteValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index ({0}, {1}) out of range for n = {2}")]
    IndexOutOfRange(usize, usize, usize),

    #[error("too few observations: need at least {needed}, have {have}")]
    TooFewObservations { needed: usize, have: usize },

    #[error("example requires a treatment column but the dataset has none")]
    MissingTreatmentColumn,

    #[error("propensity estimate {0} lies outside (0, 1)")]
    PropensityOutOfRange(f64),

    #[error("variable-importance coordinate {k} invalid for covariate dimension {dim}")]
    InvalidCoordinate { k: usize, dim: usize },

    #[error("degenerate-S calibration requires s = 0 and ds = 0 with a scalar outcome")]
    NotDegenerateS,

    #[error("Chebyshev bound is only available at alpha = 0.05 (got {0})")]
    UnsupportedAlpha(f64),

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("oracle fixtures do not share a support")]
    MismatchedSupport,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid regression input: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures in numerical routines rather than in user input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::EigensolverFailure(_))
    }
}
