use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("rotation estimation failed: {0}")]
    Estimation(String),

    #[error("rotation estimation failed at {wavelength_nm} nm: {reason}")]
    EstimationAt { wavelength_nm: f64, reason: String },

    #[error("wavelength {wavelength_nm} nm outside grid [{min_nm}, {max_nm}]")]
    WavelengthOutOfRange {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("empty sweep")]
    EmptySweep,

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("missing {probe} probe at t={timestamp_s} s, {wavelength_nm} nm")]
    MissingProbe {
        timestamp_s: f64,
        wavelength_nm: f64,
        probe: String,
    },

    #[error("duplicate {probe} probe at t={timestamp_s} s, {wavelength_nm} nm (line {line})")]
    DuplicateProbe {
        timestamp_s: f64,
        wavelength_nm: f64,
        probe: String,
        line: usize,
    },

    #[error("non-monotone wavelength grid at t={timestamp_s} s: {wavelength_nm} nm follows {previous_nm} nm")]
    NonMonotoneGrid {
        timestamp_s: f64,
        wavelength_nm: f64,
        previous_nm: f64,
    },

    #[error("wavelength grids differ between timestamps {first_s} s and {other_s} s")]
    GridMismatch { first_s: f64, other_s: f64 },

    #[error("missing coincidence mode {0}")]
    MissingMode(String),

    #[error("no coincidences in the linear basis (N = 0)")]
    NoCoincidences,

    #[error("degenerate rotation mean: {0}")]
    DegenerateMean(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the simulation or estimation itself, as opposed
    /// to malformed inputs.
    pub fn is_simulation_failure(&self) -> bool {
        matches!(
            self,
            Error::Estimation(_)
                | Error::EstimationAt { .. }
                | Error::DegenerateMean(_)
                | Error::InvalidRotation(_)
                | Error::InvalidState(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
