use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An allocation broke one of the structural invariants of [`crate::env::AllocationState`].
    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("distance {distance} m exceeds cell radius {d_max} m")]
    DistanceOutOfRange { distance: f64, d_max: f64 },

    #[error("CC selection vector of {bits} bits exceeds the {max}-bit enumeration guard")]
    DimensionTooLarge { bits: usize, max: usize },

    #[error("no candidate CC selection vectors to evaluate")]
    NoCandidates,

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("UE slot {ue} has {power} W to distribute but no allocated resource blocks")]
    NoResourceBlocks { ue: usize, power: f64 },

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
