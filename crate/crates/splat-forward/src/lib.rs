//! Explicit Gaussian point clouds with EWA projection, alpha-blended forward
//! rendering of color/depth/normal/alpha, the full training loss stack, and
//! analytic color/opacity refinement against correction targets.

pub mod gaussian;
pub mod loss;
pub mod project;
pub mod refine;
pub mod render;

pub use gaussian::{Gaussian, GaussianCloud};
pub use loss::{loss_color, loss_depth_normal, loss_normal, loss_scale, total_loss, LossParts};
pub use project::{project_gaussian, Projected};
pub use refine::{refine_reflective_colors, FrozenObjective, RefineConfig, ViewSupervision};
pub use render::{render, SplatRender};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplatError {
    #[error("empty gaussian cloud")]
    EmptyCloud,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed cloud file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] polar_core::CoreError),
    #[error(transparent)]
    Correct(#[from] photo_correct::CorrectError),
}
