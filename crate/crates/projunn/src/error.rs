use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The operand is (numerically) rank deficient, so the requested
    /// projection/inverse is not uniquely defined.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Direct-mode update would invert through a singular perturbed matrix.
    /// The caller should shrink the learning rate and retry.
    #[error("step too large: subspace eigenvalue {eigenvalue:.6e} <= -1; shrink eta")]
    StepTooLarge { eigenvalue: f64 },

    /// A stateful object no longer satisfies its invariants (e.g. a unitary
    /// parameter drifted off the manifold past tolerance).
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numeric failure at step {step}: {msg}")]
    NumericFailure { step: usize, msg: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Retry budget exhausted while applying a gradient step.
    #[error("step failure after {retries} retries: {msg}")]
    StepFailure { retries: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("corrupted file: {0}")]
    CorruptedFile(String),

    /// A Hermitian-symmetry obligation of an orthogonal filter failed.
    #[error("corrupted symmetry: {0}")]
    CorruptedSymmetry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
