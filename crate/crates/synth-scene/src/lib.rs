//! Deterministic synthetic polarized-scene oracle.
//!
//! Renders four-angle polarized captures of parametric shapes together with
//! ground-truth depth, normals, azimuth, and reflectance masks, so that every
//! downstream formula has a known-answer test bed.

pub mod corrupt;
pub mod noise;
pub mod render;
pub mod ring;
pub mod shape;
pub mod spec;

pub use corrupt::corrupt_depth;
pub use render::{render_view, RenderedView};
pub use ring::make_camera_ring;
pub use spec::{DolpModel, SceneSpec, Shape, SpecularSpec};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] polar_core::CoreError),
}
