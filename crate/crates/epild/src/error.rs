use thiserror::Error;

/// Errors produced by model construction, simulation and the numerical
/// routines built on top of them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state outside model domain: {0}")]
    OutsideDomain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model evaluation error: {0}")]
    Model(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("grid snap failed: {0}")]
    SnapFailure(String),

    #[error("ODE integration escaped the domain at t={t}: {detail}")]
    IntegrationEscape { t: f64, detail: String },

    #[error("infeasible path: {0}")]
    InfeasiblePath(String),

    #[error("path action failed on segment {segment}: {source}")]
    PathSegment {
        segment: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate regression design: {0}")]
    DegenerateDesign(String),
}

pub type Result<T> = std::result::Result<T, Error>;
