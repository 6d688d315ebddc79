use thiserror::Error;

use crate::experiments::DecayPoint;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate envelope: {0}")]
    DegenerateEnvelope(String),

    #[error("noise trace too short: need {needed} segments for qubit {qubit}, have {available}")]
    TraceTooShort { qubit: usize, needed: usize, available: usize },

    #[error("unknown qubit {0}")]
    UnknownQubit(usize),

    #[error("experiment schedule is empty")]
    ScheduleEmpty,

    #[error("power spectral density is not positive at {0} Hz")]
    PsdNonPositive(f64),

    #[error("series too short for spectral estimate: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("gate times differ across simultaneous sequences: {0:?}")]
    MixedGateTimes(Vec<f64>),

    #[error("fit failed: {reason}")]
    FitFailure { reason: String, points: Vec<DecayPoint> },

    #[error("fit did not converge: {reason} (residual sum of squares {rss:.3e})")]
    NonConvergence { reason: String, rss: f64 },

    #[error("Ramsey fringe contrast {contrast:.3} below {min:.3}")]
    FringeContrastTooLow { contrast: f64, min: f64 },

    #[error("no intersection of the amplitude curves inside [{lo}, {hi}]")]
    NoIntersection { lo: f64, hi: f64 },

    #[error("accumulated phase {phase:.3} rad exceeds pi for N = {n_blocks}; reduce N")]
    PhaseWrap { phase: f64, n_blocks: usize },

    #[error("data must be strictly positive for a log-log fit")]
    NonPositiveData,

    #[error("no crosstalk calibration for target {target} driven by {driver}")]
    MissingPairCalibration { target: usize, driver: usize },

    #[error("shot list is empty")]
    EmptyShots,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
