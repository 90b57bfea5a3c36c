//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by aggregation, attack, and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("parameter vector must be non-empty")]
    EmptyVector,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("no updates given")]
    NoUpdates,

    #[error("client ids must be contiguous 0..{expected}; found id {found} at position {position}")]
    BadClientIds {
        expected: usize,
        found: usize,
        position: usize,
    },

    #[error("need at least {min} clients, got {got}")]
    TooFewClients { got: usize, min: usize },

    #[error("degenerate weights: weights sum to zero")]
    DegenerateWeights,

    #[error("weight count {weights} does not match update count {updates}")]
    WeightCountMismatch { weights: usize, updates: usize },

    #[error("all clients rejected: posterior weights sum to zero")]
    AllClientsRejected,

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("over-trimming: beta {beta} with {clients} clients leaves no values per coordinate")]
    OverTrimming { beta: f64, clients: usize },

    #[error("{clients} clients too small for {excluded} excluded: need at least one scored neighbor")]
    KrumTooSmall { clients: usize, excluded: usize },

    #[error("{subsets} subsets exceed the enumeration guard of {limit}; use a smaller client count")]
    EnumerationGuard { subsets: u128, limit: u128 },

    #[error("malicious count {malicious} must be below half of {clients} clients")]
    TooManyMalicious { malicious: usize, clients: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("no samples of source class {class}")]
    NoSourceClassSamples { class: usize },

    #[error("cannot split {samples} samples across {clients} clients")]
    PartitionTooSmall { samples: usize, clients: usize },

    #[error("trigger does not fit: {reason}")]
    TriggerOutOfBounds { reason: String },

    #[error("round {round}: {source}")]
    RoundFailed {
        round: usize,
        source: Box<Error>,
    },

    #[error("idx format: {0}")]
    IdxFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attaches federated-round context to an error.
    pub fn in_round(self, round: usize) -> Error {
        Error::RoundFailed {
            round,
            source: Box::new(self),
        }
    }
}
