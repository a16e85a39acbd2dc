use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem dimension must be at least 1")]
    EmptyProblem,

    #[error("invalid bounds at index {index}: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    #[error("direction vector is zero")]
    ZeroDirection,

    #[error("non-active set is empty")]
    EmptyNonactive,

    #[error("reduced gradient is zero")]
    ZeroReducedGradient,

    #[error("search direction is not a descent direction (slope {slope})")]
    NotDescentDirection { slope: f64 },

    #[error("line search failed after {backtracks} backtracks")]
    LineSearchFailed { backtracks: usize },

    #[error("objective returned a non-finite value")]
    NonFinite,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("condition number must be finite and >= 1, got {0}")]
    InvalidCondition(f64),

    #[error("unknown problem '{name}'; registered problems: {}", available.join(", "))]
    UnknownProblem { name: String, available: Vec<String> },

    #[error("metrics table has no usable rows")]
    EmptyTable,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
