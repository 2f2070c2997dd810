use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truncation budget exceeded: {0}")]
    TruncationBudget(String),
    #[error("outside convergence domain: {0}")]
    OutsideConvergenceDomain(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("quadrature failure: {0}")]
    Quadrature(String),
    #[error("no closed form: {0}")]
    NoClosedForm(String),
    #[error("nonconvergent refinement: {0}")]
    NonconvergentRefinement(String),
    #[error("norm divergent: {0}")]
    NormDivergent(String),
    #[error("inversion unstable: {0}")]
    InversionUnstable(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid hurst index {0}: must lie in (0,1)")]
    InvalidHurst(f64),
    #[error("covariance embedding failed: {0}")]
    Embedding(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("scope violation: {0}")]
    ScopeViolation(String),
    #[error("step count insufficient: {0}")]
    StepCountInsufficient(String),
    #[error("density unavailable: {0}")]
    DensityUnavailable(String),
    #[error("symbol outside phi domain: {0}")]
    SymbolOutsideDomain(String),
    #[error("unstable scheme: {0}")]
    Unstable(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Scope,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameters(_) | Error::InvalidHurst(_) | Error::InvariantViolation(_) => {
                ErrorClass::Input
            }
            Error::ScopeViolation(_) | Error::NoClosedForm(_) | Error::SymbolOutsideDomain(_) => {
                ErrorClass::Scope
            }
            _ => ErrorClass::Numerical,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameters(msg.into())
}
