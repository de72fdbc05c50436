//! Back-projection of surviving hypotheses into new Gaussians and the
//! densification schedule.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use polar_core::image::BinaryImage;
use splat_forward::Gaussian;

use crate::candidates::{HypothesisField, ViewBundle};
use crate::{PmConfig, PmError};

/// Anisotropy of a back-projected Gaussian: the axis along the surface
/// normal is this much shorter than the two tangential axes.
pub const NORMAL_AXIS_RATIO: f64 = 10.0;

/// Whether an optimizer step triggers densification: inside
/// [densify_start, densify_end] and on the interval grid.
pub fn densify_schedule(step: usize, cfg: &PmConfig) -> bool {
    step >= cfg.densify_start && step <= cfg.densify_end && step % cfg.densify_interval == 0
}

/// Orthonormal rotation whose third column is the given unit vector.
fn frame_from_normal(n: &Vector3<f64>) -> UnitQuaternion<f64> {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = helper.cross(n).normalize();
    let e2 = n.cross(&e1);
    let m = Matrix3::from_columns(&[e1, e2, *n]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Turns every masked pixel with a positive best depth into a disc-shaped
/// Gaussian: centered at the back-projected point, tangential radius
/// sigma_t = d * sqrt(2) / fx (about one pixel footprint), normal axis
/// sigma_t / 10 aligned with the hypothesized world normal, opacity 0.5,
/// color read from the reflection-substituted image.
pub fn backproject_to_gaussians(
    bundle: &ViewBundle,
    field: &HypothesisField,
    mask: &BinaryImage,
) -> Result<Vec<Gaussian>, PmError> {
    let r = bundle.reference();
    if mask.width() != field.width || mask.height() != field.height {
        return Err(PmError::Dimension(format!(
            "mask {}x{} vs field {}x{}",
            mask.width(),
            mask.height(),
            field.width,
            field.height
        )));
    }
    let mut out = Vec::new();
    for y in 0..field.height {
        for x in 0..field.width {
            if !mask.get(x, y) {
                continue;
            }
            let i = field.idx(x, y);
            let d = field.best[i].depth;
            if d <= 0.0 {
                continue;
            }
            let Ok(mu) = r
                .camera
                .backproject_pixel(&Vector2::new(x as f64, y as f64), d)
            else {
                continue;
            };
            let mut n_world = r.camera.normal_to_world(&field.best[i].normal);
            let len = n_world.norm();
            if len < 1e-9 {
                continue;
            }
            n_world /= len;
            let sigma_t = d * std::f64::consts::SQRT_2 / r.camera.fx;
            let img = if r.use_crm.get(x, y) {
                &r.crm_image
            } else {
                &r.image
            };
            let px = img.pixel(x, y);
            let color = [px[0], px[1], px[2]];
            let mut g = Gaussian::new(
                mu.coords,
                frame_from_normal(&n_world),
                Vector3::new(sigma_t, sigma_t, sigma_t / NORMAL_AXIS_RATIO),
                0.5,
                color,
            )?;
            g.reflective = r.reflective.get(x, y);
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::init_hypotheses;
    use crate::testutil::plane_bundle;
    use approx::assert_relative_eq;
    use polar_core::image::BinaryImage;

    #[test]
    fn schedule_matches_interval_and_range() {
        let cfg = PmConfig::default();
        assert!(densify_schedule(1000, &cfg));
        assert!(densify_schedule(3500, &cfg));
        assert!(densify_schedule(7000, &cfg));
        assert!(!densify_schedule(999, &cfg));
        assert!(!densify_schedule(1050, &cfg));
        assert!(!densify_schedule(7100, &cfg));
        assert!(!densify_schedule(0, &cfg));
    }

    #[test]
    fn gaussians_reproject_to_their_pixels() {
        let bundle = plane_bundle(12, 12, 0.0, 0.0);
        let cfg = PmConfig::default();
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let mask = BinaryImage::filled(12, 12, true);
        let gs = backproject_to_gaussians(&bundle, &field, &mask).unwrap();
        assert_eq!(gs.len(), 144);
        let cam = &bundle.reference().camera;
        for (i, g) in gs.iter().enumerate() {
            let (px, z) = cam
                .project_point(&nalgebra::Point3::from(g.mu))
                .unwrap();
            assert_relative_eq!(px.x, (i % 12) as f64, epsilon = 1e-9);
            assert_relative_eq!(px.y, (i / 12) as f64, epsilon = 1e-9);
            assert_relative_eq!(z, crate::testutil::PLANE_Z, epsilon = 1e-9);
        }
    }

    #[test]
    fn min_axis_aligns_with_the_world_normal() {
        let bundle = plane_bundle(8, 8, 0.0, 0.0);
        let cfg = PmConfig::default();
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let mask = BinaryImage::filled(8, 8, true);
        let gs = backproject_to_gaussians(&bundle, &field, &mask).unwrap();
        for g in &gs {
            let (axis, len) = g.min_axis();
            // Plane normal toward the camera is -z in world coordinates.
            assert_relative_eq!(axis.dot(&nalgebra::Vector3::new(0.0, 0.0, -1.0)).abs(), 1.0, epsilon = 1e-9);
            let s = g.scale();
            assert_relative_eq!(s.x / len, NORMAL_AXIS_RATIO, epsilon = 1e-9);
            assert_relative_eq!(s.x, s.y, epsilon = 1e-12);
            assert_relative_eq!(g.opacity(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn mask_selects_the_emitted_subset() {
        let bundle = plane_bundle(8, 8, 0.0, 0.0);
        let cfg = PmConfig::default();
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let mut mask = BinaryImage::new(8, 8);
        mask.set(3, 4, true);
        mask.set(6, 1, true);
        let gs = backproject_to_gaussians(&bundle, &field, &mask).unwrap();
        assert_eq!(gs.len(), 2);
        // Row-major emission: (6,1) precedes (3,4).
        let want = bundle.reference().image.pixel(6, 1);
        assert_eq!(gs[0].color, [want[0], want[1], want[2]]);
        let want = bundle.reference().image.pixel(3, 4);
        assert_eq!(gs[1].color, [want[0], want[1], want[2]]);
    }
}
