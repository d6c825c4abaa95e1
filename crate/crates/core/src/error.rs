use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum HornError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The ODE integrator could not continue.
    #[error("integration failed at x = {at}: {reason}")]
    Integration { at: f64, reason: String },

    /// Adaptive quadrature ran out of its subdivision budget.
    #[error("quadrature did not converge: estimate {estimate} with error bound {error_bound}")]
    Quadrature { estimate: f64, error_bound: f64 },

    /// Root finding was handed an interval without a sign change.
    #[error("no sign change on [{a}, {b}]: f(a) = {fa}, f(b) = {fb}")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Two routes to the same quantity disagree beyond tolerance.
    #[error("internal consistency failure: {0}")]
    Consistency(String),

    /// A frequency ratio was requested at a radius where its denominator vanishes.
    #[error("nodal radius: {quantity} vanishes at {at}")]
    Nodal { quantity: &'static str, at: f64 },

    #[error("eigenvalue search exhausted: found {found} of {wanted} eigenvalues below nu = {nu_max}")]
    BracketExhausted { found: usize, wanted: usize, nu_max: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HornError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        HornError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, HornError>;
