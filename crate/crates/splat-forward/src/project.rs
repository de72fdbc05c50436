//! EWA projection of a 3D Gaussian to a 2D image-plane Gaussian.

use nalgebra::{Matrix2, Matrix2x3, Vector2};
use polar_core::CameraModel;

use crate::gaussian::Gaussian;

/// Image-plane footprint of a projected Gaussian.
#[derive(Debug, Clone, Copy)]
pub struct Projected {
    pub mean: Vector2<f64>,
    /// 2x2 covariance in pixel^2, including the 0.3 px^2 low-pass dilation.
    pub cov: Matrix2<f64>,
    /// Camera-frame depth of the center.
    pub depth: f64,
}

/// Low-pass added to the projected covariance so every Gaussian covers at
/// least a fraction of a pixel (standard EWA anti-aliasing dilation).
pub const LOW_PASS: f64 = 0.3;

/// Projects the center and covariance; returns `None` when the center is not
/// in front of the camera (culled, not an error).
pub fn project_gaussian(g: &Gaussian, cam: &CameraModel) -> Option<Projected> {
    let t = cam.to_camera(&nalgebra::Point3::from(g.mu));
    if t.z <= 1e-9 {
        return None;
    }
    let (mean, depth) = cam.project_point(&nalgebra::Point3::from(g.mu)).ok()?;
    // Jacobian of (fx x/z + cx, fy y/z + cy) at the camera-frame center.
    let j = Matrix2x3::new(
        cam.fx / t.z,
        0.0,
        -cam.fx * t.x / (t.z * t.z),
        0.0,
        cam.fy / t.z,
        -cam.fy * t.y / (t.z * t.z),
    );
    let w = cam.rotation();
    let cov3 = g.covariance();
    let jw = j * w;
    let cov = jw * cov3 * jw.transpose() + Matrix2::identity() * LOW_PASS;
    Some(Projected { mean, cov, depth })
}
