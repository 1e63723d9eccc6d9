use thiserror::Error;

/// Errors produced by model construction, decomposition and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{sites} sites exceeds the dimension cap of {cap}")]
    DimensionCap { sites: usize, cap: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("eigensolver did not converge (worst residual {worst_residual:e})")]
    NoConvergence { worst_residual: f64 },

    #[error("amplitude at site {site} is below the ratio floor ({magnitude:e} relative)")]
    AmplitudeUnderflow { site: usize, magnitude: f64 },

    #[error("segmentation has no chain-{0} bonds")]
    MissingDirection(char),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("{what} index {index} out of range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        index: i64,
        lo: i64,
        hi: i64,
    },

    #[error("matrix is not rank deficient (null residual {measure:e} >= {tol:e})")]
    NotRankDeficient { measure: f64, tol: f64 },

    #[error("ambiguous matching: states {0} and {1} are equidistant from the same closed-form root")]
    AmbiguousMatch(usize, usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
