use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps these onto process exit codes: configuration errors exit
/// with 2, numerical/step-size errors with 3.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state failed a structural invariant (normalization, hermiticity, ...).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative numerical method failed to converge.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// The operation was called outside its contract (e.g. wrong efficiency).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The integrator detected an increment too large for the step size.
    #[error("step-size error: {0}")]
    StepSize(String),

    /// Invalid or inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A density matrix left the state family required by a feedback law.
    #[error("state-family violation: {0}")]
    StateFamily(String),

    /// Filesystem / serialization problems in the CLI layer.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
