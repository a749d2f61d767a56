use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel grid: {0}")]
    InvalidGrid(String),

    #[error("spectrum is in the {found} domain, expected {expected}")]
    WrongDomain {
        expected: &'static str,
        found: &'static str,
    },

    #[error("non-positive linear power {value} at channel {channel}")]
    NonPositivePower { channel: usize, value: f64 },

    #[error("spectra live on different channel grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid oracle parameters: {0}")]
    InvalidOracle(String),

    #[error(
        "infeasible amplifier operating point: total input {total_input_dbm:.2} dBm cannot reach {target_output_dbm:.2} dBm"
    )]
    InfeasibleOperatingPoint {
        total_input_dbm: f64,
        target_output_dbm: f64,
    },

    #[error("noise figure {nf_linear} is below the 1/G floor {floor}")]
    NegativeAse { nf_linear: f64, floor: f64 },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("model kind mismatch: expected {expected}, got {found}")]
    WrongModelKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("SRS integrator produced negative power at z = {z_km:.3} km; reduce the step size")]
    NegativeIntegratorPower { z_km: f64 },

    #[error("invalid link configuration: {0}")]
    InvalidLink(String),

    #[error("invalid optimization settings: {0}")]
    InvalidOptimization(String),

    #[error("non-finite cost at iteration {iteration}")]
    NonFiniteCost { iteration: usize },

    #[error("topology validation failed for link {link}: {reason}")]
    InvalidTopology { link: u32, reason: String },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    UnsupportedVersion {
        path: PathBuf,
        found: String,
        expected: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
