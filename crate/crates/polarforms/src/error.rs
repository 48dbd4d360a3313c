use thiserror::Error;

/// Errors shared across the crate.
///
/// The CLI maps these onto its exit-code contract: domain errors exit 2,
/// singular points exit 3, precision failures exit 4.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation requested at (or too close to) a pole of the function.
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// A series or extrapolation failed to reach the requested accuracy.
    #[error("precision failure: {0}")]
    Precision(String),

    /// Parameter combination outside the implemented transformation range.
    #[error("unsupported parameters: {0}")]
    UnsupportedParameter(String),

    /// Contour extraction did not stabilize (pole on or near the circle).
    #[error("contour error: {0}")]
    Contour(String),

    /// The two-radius separation system is singular for some index.
    #[error("radius choice error: {0}")]
    RadiusChoice(String),

    /// Missing or inconsistent caller-provided data (e.g. expansions).
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;
