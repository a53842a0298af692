use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix did not have the expected dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix that must be symmetric positive-definite failed its
    /// Cholesky factorization.
    #[error("matrix is not symmetric positive-definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    /// Exact enumeration of bootstrap datasets would exceed the cap.
    #[error("enumeration of {terms} bootstrap datasets exceeds cap {cap}")]
    EnumerationCapExceeded { terms: u128, cap: u128 },

    /// A moment was requested that the distribution does not possess.
    #[error("undefined moment: {0}")]
    UndefinedMoment(&'static str),

    /// The finite-sample diagnostics path needs a prior variance v0.
    #[error("prior variance v0 is required for the finite-sample estimators")]
    MissingPriorVariance,

    /// A function of interest cannot be evaluated in closed form on this
    /// posterior summary.
    #[error("function '{label}' is not supported by this posterior form")]
    UnsupportedFunction { label: String },

    /// An invalid argument that is not covered by a more specific variant.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The log-posterior was not finite at the sampler's initial point.
    #[error("log-posterior is not finite at the initial point")]
    NonFiniteLogPosterior,

    /// A per-replicate failure, tagged with the replicate index.
    #[error("replicate {index} failed: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// Mixture statistics over components require at least this many.
    #[error("operation requires at least {required} components, got {got}")]
    TooFewComponents { required: usize, got: usize },

    /// The function class for diagnostics must be nonempty.
    #[error("empty function class")]
    EmptyFunctionClass,
}

impl Error {
    /// Wraps an error with the bootstrap replicate index it occurred in.
    pub fn in_replicate(self, index: usize) -> Error {
        Error::Replicate {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
