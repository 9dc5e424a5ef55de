use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} is too close to the geocenter for a geodetic conversion")]
    NearSingular([f64; 3]),

    #[error("degenerate geometry: satellite and receiver are {distance} m apart")]
    DegenerateGeometry { distance: f64 },

    #[error("no satellites above the elevation mask")]
    NoVisibleSatellites,

    #[error("epoch {epoch_id} has no ground-truth position")]
    MissingGroundTruth { epoch_id: u64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite activation in layer `{layer}`")]
    NonFiniteActivation { layer: String },

    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },

    #[error("{available} measurements survive the elevation mask, at least 4 are required")]
    InsufficientMeasurements { available: usize },

    #[error("normal matrix is ill-conditioned (condition number {condition:.3e})")]
    SingularGeometry { condition: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("corrected pseudorange {value} m at line {line} is outside the plausible range")]
    Unit { line: usize, value: f64 },

    #[error("trace-level split needs at least 3 traces, found {found}")]
    TooFewTraces { found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no truth available for epoch {epoch_id}")]
    MissingTruth { epoch_id: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NearSingular(_)
            | Error::DegenerateGeometry { .. }
            | Error::NonFiniteActivation { .. }
            | Error::SingularGeometry { .. }
            | Error::ShapeMismatch(_) => 4,
            _ => 3,
        }
    }
}
