//! Polarimetrically augmented PatchMatch densification: per-pixel depth and
//! normal hypotheses scored by photometric NCC, azimuth consistency, and
//! normal-depth alignment; dual consistency filtering; back-projection of
//! survivors into new Gaussians.

pub mod backproject;
pub mod candidates;
pub mod check;
pub mod propagate;
pub mod score;
#[cfg(test)]
pub(crate) mod testutil;

pub use backproject::{backproject_to_gaussians, densify_schedule};
pub use candidates::{
    aolp_candidates, init_hypotheses, normal_from_aolp, Hypothesis, HypothesisField, PmView,
    ViewBundle,
};
pub use check::{geometric_check, polarimetric_check};
pub use propagate::{propagate, smooth_normals};
pub use score::{omega, score_azimuth, score_nd, score_photometric};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PmError {
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Core(#[from] polar_core::CoreError),
    #[error(transparent)]
    Splat(#[from] splat_forward::SplatError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmConfig {
    /// Scaling of the squared azimuth difference in the consistency score.
    pub tau: f64,
    /// Smoothness of the DoLP weighting.
    pub sigma: f64,
    /// Weight of the azimuth consistency score.
    pub lambda1: f64,
    /// Weight of the normal-depth alignment score.
    pub lambda2: f64,
    /// Side length of the (odd) NCC matching window.
    pub ncc_window: usize,
    /// Bilateral spatial falloff in pixels.
    pub ncc_sigma_spatial: f64,
    /// Bilateral photometric falloff in normalized intensity.
    pub ncc_sigma_color: f64,
    /// Checkerboard propagation sweeps.
    pub sweeps: usize,
    /// Relative half-width of the multiplicative depth perturbation.
    pub perturb_rel: f64,
    /// Geometric check: max forward-backward reprojection error in pixels.
    pub geo_px_thresh: f64,
    /// Geometric check: max relative depth deviation.
    pub geo_depth_rel_thresh: f64,
    /// Polarimetric check: max averaged tangent residual.
    pub polar_eps_thresh: f64,
    /// Views that must agree for the geometric check to pass.
    pub min_consistent_views: usize,
    /// Reflective pixels in a window above which matching reads the
    /// refinement-map substituted image.
    pub reflective_pixel_threshold: usize,
    /// Densification interval in optimizer steps.
    pub densify_interval: usize,
    pub densify_start: usize,
    pub densify_end: usize,
    pub seed: u64,
}

impl Default for PmConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            sigma: 0.5,
            lambda1: 0.2,
            lambda2: 0.05,
            ncc_window: 11,
            ncc_sigma_spatial: 3.0,
            ncc_sigma_color: 0.1,
            sweeps: 3,
            perturb_rel: 0.05,
            geo_px_thresh: 1.0,
            geo_depth_rel_thresh: 0.01,
            polar_eps_thresh: 0.2,
            min_consistent_views: 2,
            reflective_pixel_threshold: 30,
            densify_interval: 100,
            densify_start: 1000,
            densify_end: 7000,
            seed: 0,
        }
    }
}
