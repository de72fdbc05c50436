//! Dual consistency filtering of refined hypotheses: forward-backward
//! geometric reprojection and the polarimetric tangent residual.

use nalgebra::Vector2;
use polar_core::image::BinaryImage;

use crate::candidates::{aolp_candidates, HypothesisField, ViewBundle};
use crate::PmConfig;

/// Forward-backward reprojection check. A reference pixel is consistent with
/// a source view when its hypothesized world point projects inside the
/// source, the source depth map agrees within `geo_depth_rel_thresh`, and the
/// source pixel reprojects back within `geo_px_thresh` pixels. The pixel
/// passes when at least `min_consistent_views` sources agree.
pub fn geometric_check(
    bundle: &ViewBundle,
    field: &HypothesisField,
    cfg: &PmConfig,
) -> BinaryImage {
    let r = bundle.reference();
    let mut out = BinaryImage::new(field.width, field.height);
    for y in 0..field.height {
        for x in 0..field.width {
            let i = field.idx(x, y);
            let d = field.best[i].depth;
            if d <= 0.0 {
                continue;
            }
            let Ok(p_world) = r
                .camera
                .backproject_pixel(&Vector2::new(x as f64, y as f64), d)
            else {
                continue;
            };
            let mut consistent = 0usize;
            for src in bundle.sources() {
                let Ok((px, z_src)) = src.camera.project_point(&p_world) else {
                    continue;
                };
                let (sw, sh) = (src.camera.width, src.camera.height);
                if px.x < 0.0 || px.y < 0.0 || px.x > sw as f64 - 1.0 || px.y > sh as f64 - 1.0 {
                    continue;
                }
                let (sx, sy) = (px.x.round() as usize, px.y.round() as usize);
                let d_src = src.depth.get(sx.min(sw - 1), sy.min(sh - 1), 0);
                if d_src <= 0.0 || (d_src - z_src).abs() / z_src > cfg.geo_depth_rel_thresh {
                    continue;
                }
                let Ok(q_world) = src
                    .camera
                    .backproject_pixel(&Vector2::new(sx as f64, sy as f64), d_src)
                else {
                    continue;
                };
                let Ok((back, _)) = r.camera.project_point(&q_world) else {
                    continue;
                };
                let err = (back - Vector2::new(x as f64, y as f64)).norm();
                if err <= cfg.geo_px_thresh {
                    consistent += 1;
                }
            }
            out.set(x, y, consistent >= cfg.min_consistent_views);
        }
    }
    out
}

/// Polarimetric consistency check. The hypothesized world normal is rotated
/// into each camera frame; with (u, v) its image-plane components and phi_s
/// the AoLP sampled at the projected pixel, the two tangent residuals
/// |u cos phi - v sin phi| and |u sin phi + v cos phi| are each minimized
/// independently over the four ambiguity branches of phi_s. A true diffuse
/// normal zeroes both (at the perpendicular and the aligned branch
/// respectively); an unrelated normal leaves both large for every branch.
/// The pixel passes when the residual average over contributing views is at
/// most `polar_eps_thresh`; pixels with no polarimetric evidence pass.
pub fn polarimetric_check(
    bundle: &ViewBundle,
    field: &HypothesisField,
    cfg: &PmConfig,
) -> BinaryImage {
    let r = bundle.reference();
    let mut out = BinaryImage::new(field.width, field.height);
    for y in 0..field.height {
        for x in 0..field.width {
            let i = field.idx(x, y);
            let d = field.best[i].depth;
            if d <= 0.0 {
                out.set(x, y, true);
                continue;
            }
            let Ok(p_world) = r
                .camera
                .backproject_pixel(&Vector2::new(x as f64, y as f64), d)
            else {
                out.set(x, y, true);
                continue;
            };
            let n_world = r.camera.normal_to_world(&field.best[i].normal);
            let mut sum = 0.0;
            let mut f = 0usize;
            for view in &bundle.views {
                let Ok((px, _)) = view.camera.project_point(&p_world) else {
                    continue;
                };
                let (vw, vh) = (view.camera.width, view.camera.height);
                if px.x < 0.0 || px.y < 0.0 || px.x > vw as f64 - 1.0 || px.y > vh as f64 - 1.0 {
                    continue;
                }
                let (sx, sy) = (
                    (px.x.round() as usize).min(vw - 1),
                    (px.y.round() as usize).min(vh - 1),
                );
                if !view.polar.valid.get(sx, sy) {
                    continue;
                }
                let phi_s = view.polar.aolp.get(sx, sy, 0);
                let n_cam = view.camera.rotation() * n_world;
                let (u, v) = (n_cam.x, n_cam.y);
                let mut eps = f64::INFINITY;
                let mut eps_hat = f64::INFINITY;
                for b in aolp_candidates(phi_s) {
                    eps = eps.min((u * b.cos() - v * b.sin()).abs());
                    eps_hat = eps_hat.min((u * b.sin() + v * b.cos()).abs());
                }
                sum += eps + eps_hat;
                f += 1;
            }
            let pass = f == 0 || sum / (2.0 * f as f64) <= cfg.polar_eps_thresh;
            out.set(x, y, pass);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::init_hypotheses;
    use crate::testutil::{plane_bundle, tilted_polar_bundle};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn geometric_check_accepts_ground_truth_depth() {
        let bundle = plane_bundle(24, 24, 0.0, 0.0);
        let cfg = PmConfig {
            min_consistent_views: 1,
            ..PmConfig::default()
        };
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let pass = geometric_check(&bundle, &field, &cfg);
        // The source camera sits to the right, so a strip at the left edge
        // projects outside it; the interior must pass completely.
        for y in 0..24 {
            for x in 12..24 {
                assert!(pass.get(x, y), "interior pixel ({x},{y}) failed");
            }
        }
    }

    #[test]
    fn geometric_check_rejects_inflated_depth() {
        let bundle = plane_bundle(24, 24, 0.0, 0.0);
        let cfg = PmConfig {
            min_consistent_views: 1,
            ..PmConfig::default()
        };
        let mut field = init_hypotheses(&bundle, &cfg).unwrap();
        for b in field.best.iter_mut() {
            b.depth *= 1.10;
        }
        let pass = geometric_check(&bundle, &field, &cfg);
        assert_eq!(pass.count(), 0, "inflated depths must all fail");
    }

    #[test]
    fn polarimetric_check_accepts_true_normals() {
        let bundle = tilted_polar_bundle(24, 24);
        let cfg = PmConfig::default();
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let pass = polarimetric_check(&bundle, &field, &cfg);
        assert_eq!(pass.count(), 24 * 24, "ground-truth normals must all pass");
    }

    #[test]
    fn polarimetric_check_rejects_most_random_normals() {
        let bundle = tilted_polar_bundle(24, 24);
        let cfg = PmConfig::default();
        let mut field = init_hypotheses(&bundle, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for b in field.best.iter_mut() {
            let n = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.05..1.0),
            )
            .normalize();
            b.normal = n;
        }
        let pass = polarimetric_check(&bundle, &field, &cfg);
        let frac = pass.count() as f64 / (24.0 * 24.0);
        assert!(frac < 0.5, "random normals passed too often: {frac}");
    }

    #[test]
    fn polarimetric_check_passes_without_evidence() {
        let bundle = plane_bundle(12, 12, 0.0, 0.0); // polar.valid all false
        let cfg = PmConfig::default();
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let pass = polarimetric_check(&bundle, &field, &cfg);
        assert_eq!(pass.count(), 12 * 12);
    }
}
