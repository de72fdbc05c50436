//! Pipeline errors with their process exit codes: 1 usage/config, 2 data,
//! 3 numerical failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<polar_core::CoreError> for CliError {
    fn from(e: polar_core::CoreError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<synth_scene::SynthError> for CliError {
    fn from(e: synth_scene::SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<photo_correct::CorrectError> for CliError {
    fn from(e: photo_correct::CorrectError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<splat_forward::SplatError> for CliError {
    fn from(e: splat_forward::SplatError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<polar_patchmatch::PmError> for CliError {
    fn from(e: polar_patchmatch::PmError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<fusion_metrics::FusionError> for CliError {
    fn from(e: fusion_metrics::FusionError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
