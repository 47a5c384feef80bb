use thiserror::Error;

/// Errors produced by the repair engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input shape mismatch: expected dimension {expected}, got {actual}")]
    InputShape { expected: usize, actual: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("label {label} out of range 1..={num_outputs}")]
    LabelOutOfRange { label: usize, num_outputs: usize },

    #[error("margin must be positive, got {0}")]
    InvalidMargin(f64),

    #[error("invalid exact-output target: entry {index} is {value}, must be non-negative")]
    InvalidTarget { index: usize, value: f64 },

    #[error("constraint system has {actual} columns, network has {expected} outputs")]
    ConstraintShape { expected: usize, actual: usize },

    #[error("proposal drives separation layer {layer} negative for point {point}")]
    NegativeAssignment { layer: usize, point: usize },

    #[error("invalid proposal: {0}")]
    InvalidProposal(String),

    #[error("unsupported modifiable layer {layer}: backend only modifies the final layer ({last})")]
    UnsupportedLayer { layer: usize, last: usize },

    #[error("unknown backend `{0}`")]
    UnknownBackend(String),

    #[error("LP internal error: {0}")]
    LpInternal(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
