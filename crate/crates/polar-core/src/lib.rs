//! Shared polarimetric imaging primitives: Stokes-vector math, A/DoLP maps,
//! the pinhole camera model with projection/back-projection, and float-image
//! I/O (PFM, 16-bit PNG, camera JSON).
//!
//! All per-pixel operations here are pure functions over immutable inputs.

pub mod camera;
pub mod error;
pub mod image;
pub mod pfm;
pub mod png16;
pub mod stokes;

pub use camera::CameraModel;
pub use error::CoreError;
pub use image::FloatImage;
pub use stokes::{aolp_dolp, intensity_image, stokes_from_angles};
pub use stokes::{PolarMaps, PolarizedCapture, StokesImage};

/// Pixels darker than this (in normalized s0 units) are flagged invalid for
/// A/DoLP: atan2 on near-zero Stokes components only amplifies noise.
pub const EPS_DARK: f64 = 1e-4;
