use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("slot {slot} out of range for tensor of rank {rank}")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("contraction requires opposite variances on the paired slots")]
    SameVariance,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("singular metric at {point:?}: det = {det:e}")]
    SingularMetric { point: [f64; 4], det: f64 },
    #[error("point {point:?} outside the domain of {chart}: {reason}")]
    Domain {
        chart: String,
        point: [f64; 4],
        reason: String,
    },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("unsupported chart transform {from} -> {to}")]
    UnsupportedTransform { from: String, to: String },
    #[error("non-differentiable point: {0}")]
    NonDifferentiable(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("integration failed at tau = {tau}: {reason}")]
    Integration { tau: f64, reason: String },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
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

pub type Result<T> = std::result::Result<T, Error>;
