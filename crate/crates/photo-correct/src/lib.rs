//! Polarization-guided photometric correction: reflective-region localization
//! from DoLP and intensity, the Polarimetric Reference Intensity (PRI),
//! Color Refinement Maps (I_diff, I_chro) with PRI-similarity diffuse
//! propagation, and the reflective-aware loss with D-SSIM.

pub mod crm;
pub mod loss;
pub mod masks;
pub mod ssim;

pub use crm::{compute_ichro, compute_idiff, compute_pri, propagate_diffuse, CrmSet};
pub use loss::reflective_loss;
pub use masks::{localize_reflective, ReflectiveMasks};
pub use ssim::dssim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorrectError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("correction unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Core(#[from] polar_core::CoreError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionConfig {
    /// Specular detector: DoLP lower bound.
    pub dolp_spec_min: f64,
    /// Overexposure detector: DoLP upper bound.
    pub dolp_over_max: f64,
    /// Both detectors: max-channel intensity lower bound (8-bit 160 equivalent).
    pub intensity_min: f64,
    /// PRI-similarity gate for diffuse propagation.
    pub mahalanobis_max: f64,
    /// Diffuse reflection coefficient; cancels in PRI and only rescales
    /// chromaticity uniformly in I_chro.
    pub rho_d: f64,
    /// Outward ring-search limit for propagation donors, in pixels.
    pub search_radius: usize,
    /// D-SSIM weight inside the L1 + D-SSIM blends.
    pub lambda_dssim: f64,
    /// Reflective-pixel count above which a matching window switches to the
    /// CRM-substituted image.
    pub reflective_pixel_threshold: usize,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            dolp_spec_min: 0.3,
            dolp_over_max: 0.1,
            intensity_min: 160.0 / 255.0,
            mahalanobis_max: 0.8,
            rho_d: 1.0,
            search_radius: 64,
            lambda_dssim: 0.2,
            reflective_pixel_threshold: 30,
        }
    }
}
