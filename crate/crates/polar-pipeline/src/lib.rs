//! Pipeline orchestration: configuration, on-disk artifacts, and the staged
//! polarimetric reconstruction pipeline behind the `polarsplat` binary.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod stages;

pub use config::{load_config, PipelineConfig};
pub use error::CliError;
pub use stages::{
    cmd_correct, cmd_densify, cmd_eval, cmd_pipeline, cmd_preprocess, cmd_reconstruct, cmd_synth,
};

/// Default worker count for per-view parallel stages.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
