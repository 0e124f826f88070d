use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point left the domain of a distance-generating function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A singular point was hit (origin of a scale-invariant loss, t = 0 for Nesterov, r -> 0).
    #[error("singularity at t = {time}: {what}")]
    Singularity { time: f64, what: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller asked for something the object does not promise (e.g. an untagged symmetry).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("corrupted optimizer state: {0}")]
    StateCorruption(String),

    #[error("time grid error: {0}")]
    Grid(String),
}

impl Error {
    pub(crate) fn singular(what: impl Into<String>) -> Self {
        Error::Singularity {
            time: f64::NAN,
            what: what.into(),
        }
    }

    /// Attach the integration time to a singularity raised without one.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::Singularity { time, what } if time.is_nan() => Error::Singularity { time: t, what },
            other => other,
        }
    }
}
