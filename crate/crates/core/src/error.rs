use thiserror::Error;

/// Errors raised by grid construction, system evaluation and the analysis kernels.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("axis {axis} has {points} points, at least 4 are required")]
    TooFewPoints { axis: usize, points: usize },

    #[error("non-finite value at point {point}, component {component}")]
    NonFinite { point: usize, component: usize },

    #[error("state {state:?} lies outside the state domain of `{system}`")]
    OutsideDomain { system: String, state: Vec<f64> },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("margin too small on axis {axis}: have {margin}, need at least {required}")]
    MarginTooSmall {
        axis: usize,
        margin: f64,
        required: f64,
    },

    #[error("epsilon {epsilon} is too small for the grid (minimum {minimum})")]
    EpsilonTooSmall { epsilon: f64, minimum: f64 },

    #[error("epsilon {epsilon} is too large for the domain (maximum {maximum})")]
    EpsilonTooLarge { epsilon: f64, maximum: f64 },

    #[error("fit needs at least 3 positive pairs, got {0}")]
    InsufficientData(usize),

    #[error("wave interaction: {0}")]
    WaveInteraction(String),

    #[error("domain violation at t = {time}: {detail}")]
    DomainViolation { time: f64, detail: String },

    #[error("time step collapsed to {dt} at t = {time}")]
    TimeStepCollapse { time: f64, dt: f64 },

    #[error("solver failed to converge: {0}")]
    NoConvergence(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
