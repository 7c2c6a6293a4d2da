use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FracError {
    #[error("divergent energy: {0}")]
    DivergentEnergy(String),
    #[error("undefined tail: {0}")]
    UndefinedTail(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("jump outside domain: {0}")]
    JumpOutsideDomain(String),
    #[error("gamma at well: |gamma| = {0} must be < 1")]
    GammaAtWell(f64),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("scale violation: {0}")]
    ScaleViolation(String),
    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl FracError {
    /// Stable identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            FracError::DivergentEnergy(_) => "DivergentEnergy",
            FracError::UndefinedTail(_) => "UndefinedTail",
            FracError::PreconditionViolated(_) => "PreconditionViolated",
            FracError::JumpOutsideDomain(_) => "JumpOutsideDomain",
            FracError::GammaAtWell(_) => "GammaAtWell",
            FracError::NotConverged(_) => "NotConverged",
            FracError::SingularSystem(_) => "SingularSystem",
            FracError::ScaleViolation(_) => "ScaleViolation",
            FracError::IllConditionedFit(_) => "IllConditionedFit",
            FracError::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
