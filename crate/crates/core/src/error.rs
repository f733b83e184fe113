use thiserror::Error;

/// Errors raised by model construction, estimation and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("absolute continuity violated: behavior never plays action {action} in state {state} but the target does")]
    AbsoluteContinuity { state: usize, action: usize },

    #[error("return {ret} from state {state} has target mass but no behavior mass")]
    SupportMismatch { state: usize, ret: i64 },

    #[error("value iteration did not converge within {iterations} sweeps")]
    NoConvergence { iterations: usize },

    #[error("return grid of {cells} cells exceeds the cap of {cap}")]
    GridOverflow { cells: usize, cap: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("no calibration sample starts in state {0}")]
    EmptyStartState(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than
    /// by the computation itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidModel(_)
                | Error::InvalidPolicy(_)
                | Error::InvalidParameter(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
