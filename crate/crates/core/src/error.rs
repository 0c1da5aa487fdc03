use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("the origin is not a valid sampled state")]
    UndefinedState,

    #[error("traffic model is missing a transition from region {region} with inter-sample time {k}")]
    IncompleteModel { region: String, k: u32 },

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("no collision-free scheduler exists: {0}")]
    Unschedulable(String),

    #[error("scheduling fault at step {step}: {reason}")]
    SchedulingFault { step: usize, reason: String },

    #[error("strategy has no action for region {0}")]
    StrategyCoverage(String),

    #[error(transparent)]
    Parse(#[from] crate::io::ParseError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
