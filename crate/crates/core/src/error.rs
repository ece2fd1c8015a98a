use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("ellipticity violated at {point:?}: {reason}")]
    Ellipticity { point: Vec<f64>, reason: String },
    #[error("unknown catalogue entry `{0}`")]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite integrand sample at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("quadrature did not converge (error estimate {estimate:e} at node cap {cap})")]
    NoConvergence { estimate: f64, cap: usize },
    #[error("degenerate height H = {0:e} at r = {1}")]
    DegenerateHeight(f64, f64),
    #[error("weak-form residual {residual:e} exceeds threshold {threshold:e}")]
    NotASolution { residual: f64, threshold: f64 },
    #[error("|u| = {value:e} falls below threshold {threshold:e} at {point:?}")]
    SmallSolution {
        value: f64,
        threshold: f64,
        point: Vec<f64>,
    },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("Newton iteration failed: {0}")]
    NewtonFailed(String),
    #[error("mollified extension violates its derivative bounds: {0}")]
    MollifierBound(String),
    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),
    #[error("Robin coefficient is not a negative constant: {0}")]
    NonConstantEta(String),
    #[error("integral underflow: {0}")]
    Underflow(String),
    #[error("radius grid is empty")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
