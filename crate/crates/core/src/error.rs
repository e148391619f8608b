//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by spline, network, channel, coding, and harness code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A spline grid was constructed with an empty interval, zero intervals,
    /// or otherwise inconsistent parameters.
    #[error("invalid spline grid: {0}")]
    InvalidGrid(String),

    /// A function argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A vector or matrix had the wrong length for the operation.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// A NaN or infinity appeared where a finite value is required.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A message index was outside 0..2^k.
    #[error("message index {index} out of range (codebook has {count} messages)")]
    MessageOutOfRange { index: usize, count: usize },

    /// The raw codebook has zero average power, so normalization is undefined.
    #[error("codebook has zero average power; normalization is undefined")]
    ZeroCodebook,

    /// Neuron-mode pruning needs at least two consecutive KAN layers.
    #[error("neuron pruning requires at least two consecutive KAN layers")]
    SingleLayerNeuronPrune,

    /// The linearity tolerance was not reached within the segment budget.
    #[error("non-linearity score exceeds n_max = {n_max} (residual {residual:.3e})")]
    NonlinearityExceeded { n_max: usize, residual: f64 },

    /// No grid point produced a domain-valid fit for this candidate.
    #[error("candidate '{candidate}' has no domain-valid fit for these samples")]
    CandidateDomain { candidate: String },

    /// A persisted model referenced a candidate id missing from the registry.
    #[error("unknown candidate id '{id}'")]
    CandidateUnknown { id: String },

    /// Symbolic regression was invoked with an empty candidate library.
    #[error("candidate library is empty")]
    EmptyLibrary,

    /// Symbolic regression failed on one edge; coordinates identify it.
    #[error("symbolic fit failed for {layer} edge (in {input} -> out {output}): {source}")]
    SymbolifyEdge {
        layer: String,
        output: usize,
        input: usize,
        #[source]
        source: Box<Error>,
    },

    /// A symbolic-edge evaluation left its candidate's domain.
    #[error(
        "candidate '{candidate}' domain violated at x = {value} on edge (in {input} -> out {output})"
    )]
    SymbolicDomain {
        candidate: String,
        output: usize,
        input: usize,
        value: f64,
    },

    /// An operation expected symbolic activations but found raw ones.
    #[error("{layer} still has active non-symbolic edges; run symbolify first")]
    NotSymbolic { layer: String },

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainDiverged { epoch: usize, detail: String },

    /// A model or checkpoint file declared an unsupported format version.
    #[error("unsupported format version {found} in field 'format_version' (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    /// A model or checkpoint file violated the schema beyond what serde
    /// reports structurally.
    #[error("model schema violation: {0}")]
    ModelSchema(String),

    /// The least-squares system for a grid refit was numerically singular.
    #[error("singular least-squares system in {context}")]
    SingularSystem { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand for [`Error::DimensionMismatch`].
    pub fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Shorthand for [`Error::NonFinite`].
    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}
