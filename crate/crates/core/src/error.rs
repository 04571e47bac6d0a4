use thiserror::Error;

/// Errors raised by the simulation and diagnostics routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid state point {0}: must be finite and nonnegative")]
    InvalidState(f64),

    #[error("{0} is not a state of the chain (expected 0, 1/n or n with n >= 2)")]
    NotChainState(f64),

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid probability vector at x = {x}: {reason}")]
    InvalidProbVector { x: f64, reason: String },

    #[error("map w_{index} produced invalid state {value}")]
    NonFiniteState { index: usize, value: f64 },

    #[error("time {t} outside trajectory horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("enumerating {maps}^{depth} index words exceeds the work budget of {budget}")]
    EnumerationBudget { maps: usize, depth: usize, budget: u64 },

    #[error("grid empty")]
    EmptyGrid,

    #[error("tail majorant inapplicable: {0}")]
    TailMajorant(String),

    #[error("trajectory {trajectory}: {source}")]
    Trajectory {
        trajectory: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
