use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("root finder did not converge: {iterations} iterations, residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("budget exceeded: {what} needs {needed}, limit is {limit}")]
    BudgetExceeded { what: &'static str, needed: u64, limit: u64 },

    #[error("function is undefined at the point at infinity")]
    EvaluationAtInfinity,

    #[error("no tabulated value within {radius:e} of the query point (nearest at {distance:e})")]
    OutsideTable { radius: f64, distance: f64 },

    #[error("numerator and denominator share a root near {near}")]
    CommonFactor { near: String },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cover too coarse: piece {piece} contains two points of the fiber over {base}")]
    CoverTooCoarse { piece: usize, base: String },

    #[error("witness verification failed: {0}")]
    WitnessFailed(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
