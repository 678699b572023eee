//! Experiment orchestration: TOML configs, named experiment suites, CSV and
//! JSON artifacts, and the plot manifest.

pub mod config;
pub mod identities;
pub mod manifest;
pub mod runner;

use thiserror::Error;

use crate::layer_ops::LayerError;
use crate::morawetz::MorawetzError;
use crate::quasimode::QuasimodeError;
use crate::scattering::ScatteringError;
use crate::spectra::SpectraError;

/// Process exit status for a configuration, validation or I/O error.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit status for a numerical failure.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<LayerError> for CliError {
    fn from(e: LayerError) -> Self {
        match e {
            LayerError::TooLarge { .. } | LayerError::InvalidParams(_) | LayerError::BadWavenumber(_) | LayerError::ZeroEta => {
                CliError::Config(e.to_string())
            }
            LayerError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::Layer(l) => l.into(),
            SpectraError::ZeroEta | SpectraError::Unordered => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ScatteringError> for CliError {
    fn from(e: ScatteringError) -> Self {
        match e {
            ScatteringError::Layer(l) => l.into(),
            ScatteringError::Spectra(s) => s.into(),
            ScatteringError::BadDirection(_) | ScatteringError::ZeroEta => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<QuasimodeError> for CliError {
    fn from(e: QuasimodeError) -> Self {
        match e {
            QuasimodeError::Layer(l) => l.into(),
            QuasimodeError::Spectra(s) => s.into(),
            QuasimodeError::NoFacing(_) | QuasimodeError::EmptySegment(_) => CliError::Config(e.to_string()),
            QuasimodeError::Mismatch => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<MorawetzError> for CliError {
    fn from(e: MorawetzError) -> Self {
        match e {
            MorawetzError::InfeasibleRadii { .. }
            | MorawetzError::InvalidEpsilon { .. }
            | MorawetzError::GridTooCoarse(_)
            | MorawetzError::GridTooSmall
            | MorawetzError::SourceOutside { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
