//! Error taxonomy shared by every module.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, DoaLabError>;

#[derive(Debug, Error)]
pub enum DoaLabError {
    /// A caller-supplied value is outside the domain of the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A sample or population eigenvalue sits inside (or too close to) the
    /// noise bulk, so the spiked-model correction is undefined.
    #[error(
        "separation violation: eigenvalue #{index} = {value:.6e} does not clear \
         the bulk edge {edge:.6e}"
    )]
    SeparationViolation { index: usize, value: f64, edge: f64 },

    /// An iterative numeric procedure failed to converge or produced
    /// non-finite values.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    /// The curvature entering a variance prediction is too small for the
    /// delta-method step to be meaningful.
    #[error("degenerate curvature: |{value:.3e}| below 1e-6")]
    DegenerateCurvature { value: f64 },

    /// A sweep never reached the requested transition.
    #[error("not found: {0}")]
    NotFound(String),

    /// The method does not support the requested operation.
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    /// Configuration file errors (parse or validation).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
