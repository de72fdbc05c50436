//! Volumetric fusion of depth maps into a truncated signed-distance grid,
//! marching-cubes surface extraction, and geometric evaluation metrics
//! (Chamfer distance, normal mean angular error).

pub mod mesh;
pub mod metrics;
pub mod tables;
pub mod tsdf;

pub use mesh::{extract_mesh, TriangleMesh};
pub use metrics::{chamfer_distance, normal_mae, sample_mesh};
pub use tsdf::{integrate_depth, TsdfVolume};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("malformed mesh file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] polar_core::CoreError),
}
