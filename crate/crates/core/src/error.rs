//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped by origin: input/config validation problems (bad
/// files, bad parameters, violated preconditions) versus failures that occur
/// while a pipeline is running. [`Error::is_validation`] exposes the split so
/// callers can map errors onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: no records")]
    EmptyLog { path: String },
    #[error("{path}:{line}: {msg}")]
    MalformedRow {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error("stage count {requested} exceeds record count {available}")]
    TooManyStages { requested: usize, available: usize },
    #[error("empty {name} partition")]
    EmptyPartition { name: &'static str },
    #[error("stage {stage} is empty")]
    EmptyStage { stage: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("negative entry in distribution at index {0}")]
    NegativeEntry(usize),
    #[error("distribution does not sum to 1 (sum = {0})")]
    NotADistribution(f64),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("index out of range: {what} {index} >= {bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("popularity factor must be positive (got {0})")]
    NonPositiveFactor(f64),
    #[error("user {user} has interacted with every item")]
    NoNegativeAvailable { user: u32 },
    #[error("non-finite loss at {context}")]
    NonFiniteLoss { context: String },
    #[error("fewer than {k} candidates available ({available})")]
    InsufficientCandidates { k: usize, available: usize },
    #[error("empty group")]
    EmptyGroup,
    #[error("group has zero mean quality ratio")]
    ZeroRatio,
    #[error("fewer graded items ({items}) than requested partitions ({requested})")]
    TooFewGraded { items: usize, requested: usize },
    #[error("item {0} is not assigned to a quality bin")]
    ItemNotBinned(u32),
    #[error("correlation undefined: constant input")]
    ConstantInput,
    #[error("infeasible click model: all click probabilities are zero")]
    InfeasibleCap,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a pipeline stage tag to an error.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid input or configuration rather than
    /// a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::EmptyLog { .. }
            | Error::MalformedRow { .. }
            | Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::TooManyStages { .. }
            | Error::EmptyPartition { .. }
            | Error::DimensionMismatch { .. }
            | Error::NegativeEntry(_)
            | Error::NotADistribution(_)
            | Error::NonFinite(_)
            | Error::IndexOutOfRange { .. }
            | Error::TooFewGraded { .. } => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
