use thiserror::Error;

/// Errors raised by the reachability library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear program solver failed to converge ({0})")]
    LpNumericalFailure(String),

    #[error("zonotope ceiling exceeded: {needed} zonotopes required, limit is {limit}")]
    ResourceLimit { needed: u64, limit: usize },

    #[error("too many generators for exhaustive enumeration: {found} (limit {limit})")]
    TooManyGenerators { found: usize, limit: usize },

    #[error("model parse error at {path}: {message}")]
    ModelParse { path: String, message: String },

    #[error("invalid model: layer {layer}: {message}")]
    ModelValidation { layer: usize, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
