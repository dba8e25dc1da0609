use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or state field failed validation. `field` names the offending entry,
    /// e.g. `species[2].a`.
    #[error("invalid {field}: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("species index {index} out of range for {n} species")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no coexistence steady state: lambda(B(1,u,eps)) = {lambda_at_one:e} is not positive")]
    NoCoexistence { lambda_at_one: f64 },

    #[error("all break-even concentrations are infinite (washout regime)")]
    WashoutRegime,

    #[error("non-generic dilution rate: species {first} and {second} share the smallest break-even concentration")]
    NonGenericDilution { first: usize, second: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidField {
        field: field.into(),
        reason: reason.into(),
    }
}
