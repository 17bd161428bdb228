use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = PitError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PitError {
    #[error("cell {cell} is inverted or degenerate (signed area {area:e})")]
    InvertedElement { cell: usize, area: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error(
        "Butler-Volmer exponent {exponent:.3} exceeds the overflow guard (v_corr = {v_corr} V, phi = {phi} V)"
    )]
    Overflow { exponent: f64, v_corr: f64, phi: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations; residual history {history:?}")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("mesh motion failed: {0}")]
    MeshMotion(String),

    #[error("pit {pit_id} front self-intersects after advance (segments {first} and {second}); reduce dt")]
    SelfIntersection {
        pit_id: usize,
        first: usize,
        second: usize,
    },

    #[error("pit merge failed: {0}")]
    Merge(String),

    #[error("triangulation failed: {0}")]
    Triangulation(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<PitError>,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PitError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PitError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            PitError::Invalid(_) | PitError::Parse { .. } | PitError::Config { .. } => true,
            PitError::Step { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
