use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight power {exponent} is not locally integrable in dimension {dim}")]
    NonIntegrable { exponent: f64, dim: usize },
    #[error("ball misses the weight domain")]
    EmptyBall,
    #[error("integration region is empty")]
    EmptyRegion,
    #[error("height {target} exceeds the largest reachable height {reachable}")]
    NoBracket { target: f64, reachable: f64 },
    #[error("linear system is singular at time step {step}")]
    SingularSystem { step: usize },
    #[error("ellipticity violated at sample {index}: {detail}")]
    EllipticityViolation { index: usize, detail: String },
    #[error("gate failed: {0}")]
    GateFailed(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
