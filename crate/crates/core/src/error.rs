use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("transcript {0} has no agent sentence")]
    NoAgentSentence(String),
    #[error("transcript {0} has no customer sentence")]
    NoCustomerSentence(String),
    #[error("vector {0} has a different dimension than the first record")]
    DimensionMismatch(String),
    #[error("vector {0} contains a non-finite value")]
    NonFiniteValue(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("embedding set is empty")]
    EmptySet,
    #[error("invalid binary container: {0}")]
    BadContainer(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("position embedding dimension must be even, got {0}")]
    OddDimension(usize),
    #[error("sentence offset {offset} outside [-{n_as}, {n_as}]")]
    OffsetOutOfRange { offset: i64, n_as: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no customer sentence inside the tagging window")]
    NoCandidate,
    #[error("encoder failure: {0}")]
    EncoderFailure(String),

    #[error("need at least 2 samples to fit whitening, got {0}")]
    TooFewSamples(usize),
    #[error("covariance is identically zero")]
    DegenerateCovariance,

    #[error("cosine of a zero vector is undefined")]
    ZeroVector,
    #[error("node {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("attenuation factor must lie in (0, 1), got {0}")]
    BadBeta(f64),
    #[error("graph with {0} nodes is too large for the all-pairs oracle")]
    GraphTooLarge(usize),

    #[error("centrality table is empty")]
    EmptyTable,
    #[error("every matched centrality is zero; the similarity threshold leaves no edges")]
    AllZeroCentrality,
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),

    #[error("could not place {0} well-separated cluster directions")]
    RejectionExhausted(usize),
    #[error("unknown node id {0}")]
    UnknownNode(String),
}

/// Coarse failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numeric,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::TooFewSamples(_)
            | Error::DegenerateCovariance
            | Error::ZeroVector
            | Error::BadBeta(_)
            | Error::GraphTooLarge(_)
            | Error::AllZeroCentrality
            | Error::NonPositiveGamma(_)
            | Error::RejectionExhausted(_)
            | Error::OddDimension(_)
            | Error::NoCandidate => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
