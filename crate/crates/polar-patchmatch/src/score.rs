//! Hypothesis scoring: azimuth consistency, normal-depth alignment, and
//! bilaterally weighted NCC photo-consistency through the plane-induced
//! homography.

use nalgebra::{Vector2, Vector3};
use polar_core::CameraModel;
use std::f64::consts::PI;

use crate::candidates::{aolp_candidates, Hypothesis, ViewBundle};
use crate::PmConfig;

/// DoLP confidence weight: large when the material is unambiguously
/// specular (rho near 1) or diffuse (rho near 0).
pub fn omega(rho: f64, sigma: f64) -> f64 {
    let a = (1.0 - rho) * (1.0 - rho);
    (-a / (2.0 * sigma * sigma)).exp() + (-rho * rho / (2.0 * sigma * sigma)).exp()
}

/// Wraps an angle difference into (-pi, pi].
fn wrap_diff(d: f64) -> f64 {
    let d = d.rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Index of the AoLP branch closest to the candidate azimuth (the branch the
/// min in `score_azimuth` selects, since omega is branch-independent).
pub fn best_branch(phi: f64, varphi: f64) -> usize {
    aolp_candidates(phi)
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            wrap_diff(*a - varphi)
                .abs()
                .total_cmp(&wrap_diff(*b - varphi).abs())
        })
        .map(|(i, _)| i)
        .unwrap()
}

/// S_a = min_i omega * exp(delta_i^2 / tau) over the four AoLP branches,
/// with delta the wrapped angular difference to the candidate normal's
/// azimuth. Invalid polarization contributes a neutral 0.
pub fn score_azimuth(
    n_star: &Vector3<f64>,
    aolp: f64,
    dolp: f64,
    polar_valid: bool,
    cfg: &PmConfig,
) -> f64 {
    if !polar_valid {
        return 0.0;
    }
    let varphi = n_star.y.atan2(n_star.x);
    let w = omega(dolp, cfg.sigma);
    aolp_candidates(aolp)
        .iter()
        .map(|&phi_i| {
            let d = wrap_diff(phi_i - varphi);
            w * (d * d / cfg.tau).exp()
        })
        .fold(f64::INFINITY, f64::min)
}

/// S_nd = 1 - (gradient normal . n*), with the gradient normal built from
/// the backprojected right/down neighbor depth hypotheses. Missing or
/// invalid neighbors give the neutral score 1.
pub fn score_nd(
    cam: &CameraModel,
    x: usize,
    y: usize,
    hyp: &Hypothesis,
    d_right: Option<f64>,
    d_down: Option<f64>,
) -> f64 {
    let (Some(dr), Some(dd)) = (d_right, d_down) else {
        return 1.0;
    };
    if hyp.depth <= 0.0 || dr <= 0.0 || dd <= 0.0 {
        return 1.0;
    }
    let p = |px: f64, py: f64, d: f64| cam.backproject_camera(&Vector2::new(px, py), d);
    let (Ok(pc), Ok(pr), Ok(pd)) = (
        p(x as f64, y as f64, hyp.depth),
        p(x as f64 + 1.0, y as f64, dr),
        p(x as f64, y as f64 + 1.0, dd),
    ) else {
        return 1.0;
    };
    let mut n_cam = (pr - pc).cross(&(pd - pc));
    let len = n_cam.norm();
    if len < 1e-12 {
        return 1.0;
    }
    n_cam /= len;
    let mut n_grad = CameraModel::FLIP * n_cam;
    if n_grad.z < 0.0 {
        n_grad = -n_grad;
    }
    1.0 - n_grad.dot(&hyp.normal)
}

/// Out-of-bounds / degenerate-plane per-view photometric score.
const SCORE_OOB: f64 = 2.0;
/// Neutral per-view score when a window has no usable variance.
const SCORE_NEUTRAL: f64 = 1.0;

/// S_c: mean over source views of (1 - bilaterally weighted NCC), with the
/// patch correspondence induced by the plane of (d*, n*). Views where the
/// patch leaves the source image score 2; textureless windows score 1.
/// Windows with many reflective pixels read the CRM-substituted image.
pub fn score_photometric(
    bundle: &ViewBundle,
    x: usize,
    y: usize,
    hyp: &Hypothesis,
    cfg: &PmConfig,
) -> f64 {
    let r = bundle.reference();
    let cam = &r.camera;
    let (w, h) = (cam.width, cam.height);
    // Plane through the backprojected center, in the reference camera frame.
    let n_cam = CameraModel::FLIP * hyp.normal;
    let Ok(p0) = cam.backproject_camera(&Vector2::new(x as f64, y as f64), hyp.depth) else {
        return SCORE_OOB;
    };
    let plane_d = n_cam.dot(&p0.coords);
    let ref_luma = if r.use_crm.get(x, y) { &r.crm_luma } else { &r.luma };
    let center_val = ref_luma.get(x, y, 0);
    let half = (cfg.ncc_window / 2) as i64;

    // Window samples in the reference view, with bilateral weights and the
    // plane point each pixel corresponds to.
    let mut refs: Vec<(f64, f64, Vector3<f64>)> = Vec::with_capacity(cfg.ncc_window * cfg.ncc_window);
    for dy in -half..=half {
        for dx in -half..=half {
            let qx = x as i64 + dx;
            let qy = y as i64 + dy;
            if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                continue;
            }
            let v = ref_luma.get(qx as usize, qy as usize, 0);
            let spatial = (dx * dx + dy * dy) as f64;
            let dc = v - center_val;
            let weight = (-spatial / (2.0 * cfg.ncc_sigma_spatial * cfg.ncc_sigma_spatial)).exp()
                * (-dc * dc / (2.0 * cfg.ncc_sigma_color * cfg.ncc_sigma_color)).exp();
            let ray = cam.pixel_ray(&Vector2::new(qx as f64, qy as f64));
            let denom = n_cam.dot(&ray);
            if denom.abs() < 1e-12 {
                return SCORE_OOB;
            }
            let t = plane_d / denom;
            if t <= 0.0 {
                return SCORE_OOB;
            }
            let p_world = cam.to_world(&nalgebra::Point3::from(ray * t));
            refs.push((v, weight, p_world.coords));
        }
    }
    if refs.len() < 2 {
        return SCORE_NEUTRAL;
    }

    let mut total = 0.0;
    let mut n_views = 0usize;
    for src in bundle.sources() {
        total += view_score(src, &refs, &p0, cam);
        n_views += 1;
    }
    if n_views == 0 {
        return 0.0;
    }
    total / n_views as f64
}

fn view_score(
    src: &crate::candidates::PmView,
    refs: &[(f64, f64, Vector3<f64>)],
    center_cam: &nalgebra::Point3<f64>,
    ref_cam: &CameraModel,
) -> f64 {
    let (sw, sh) = (src.camera.width as f64, src.camera.height as f64);
    // CRM substitution keyed on where the window center lands in the source.
    let center_world = ref_cam.to_world(center_cam);
    let Ok((center_px, _)) = src.camera.project_point(&center_world) else {
        return SCORE_OOB;
    };
    if center_px.x < 0.0 || center_px.y < 0.0 || center_px.x > sw - 1.0 || center_px.y > sh - 1.0 {
        return SCORE_OOB;
    }
    let (cx, cy) = (center_px.x.round() as usize, center_px.y.round() as usize);
    let src_luma = if src.use_crm.get(cx.min(src.camera.width - 1), cy.min(src.camera.height - 1)) {
        &src.crm_luma
    } else {
        &src.luma
    };

    let mut pairs: Vec<(f64, f64, f64)> = Vec::with_capacity(refs.len());
    for &(rv, wgt, p_world) in refs {
        let Ok((px, _)) = src.camera.project_point(&nalgebra::Point3::from(p_world)) else {
            return SCORE_OOB;
        };
        let Some(sv) = src_luma.sample_bilinear(px.x, px.y, 0) else {
            return SCORE_OOB;
        };
        pairs.push((rv, sv, wgt));
    }
    let wsum: f64 = pairs.iter().map(|p| p.2).sum();
    if wsum < 1e-12 {
        return SCORE_NEUTRAL;
    }
    let mu_r: f64 = pairs.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum;
    let mu_s: f64 = pairs.iter().map(|p| p.1 * p.2).sum::<f64>() / wsum;
    let mut cov = 0.0;
    let mut var_r = 0.0;
    let mut var_s = 0.0;
    for &(rv, sv, wgt) in &pairs {
        cov += wgt * (rv - mu_r) * (sv - mu_s);
        var_r += wgt * (rv - mu_r) * (rv - mu_r);
        var_s += wgt * (sv - mu_s) * (sv - mu_s);
    }
    if var_r < 1e-12 || var_s < 1e-12 {
        return SCORE_NEUTRAL;
    }
    let ncc = (cov / (var_r * var_s).sqrt()).clamp(-1.0, 1.0);
    1.0 - ncc
}

/// Total candidate cost S_c + lambda1 S_a + lambda2 S_nd. The neighbor
/// depths feed the alignment term; `None` at borders scores neutrally.
pub fn total_cost(
    bundle: &ViewBundle,
    x: usize,
    y: usize,
    hyp: &Hypothesis,
    d_right: Option<f64>,
    d_down: Option<f64>,
    cfg: &PmConfig,
) -> f64 {
    let r = bundle.reference();
    let s_c = score_photometric(bundle, x, y, hyp, cfg);
    let s_a = if cfg.lambda1 > 0.0 {
        score_azimuth(
            &hyp.normal,
            r.polar.aolp.get(x, y, 0),
            r.polar.dolp.get(x, y, 0),
            r.polar.valid.get(x, y),
            cfg,
        )
    } else {
        0.0
    };
    let s_nd = if cfg.lambda2 > 0.0 {
        score_nd(&r.camera, x, y, hyp, d_right, d_down)
    } else {
        0.0
    };
    s_c + cfg.lambda1 * s_a + cfg.lambda2 * s_nd
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn omega_known_values_and_symmetry() {
        assert_relative_eq!(omega(0.5, 0.5), 2.0 * (-0.5f64).exp(), epsilon = 1e-12);
        let want = 1.0 + (-1.0f64 / (2.0 * 0.5 * 0.5)).exp();
        assert_relative_eq!(omega(0.0, 0.5), want, epsilon = 1e-12);
        assert_relative_eq!(omega(1.0, 0.5), want, epsilon = 1e-12);
        for rho in [0.1, 0.3, 0.77] {
            assert_relative_eq!(omega(rho, 0.5), omega(1.0 - rho, 0.5), epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_azimuth_match_scores_omega() {
        let cfg = PmConfig::default();
        let phi = 0.8f64;
        let n = Vector3::new(phi.cos(), phi.sin(), 0.3).normalize();
        let s = score_azimuth(&n, phi, 0.4, true, &cfg);
        assert_relative_eq!(s, omega(0.4, cfg.sigma), epsilon = 1e-9);
    }

    #[test]
    fn azimuth_wraps_across_two_pi() {
        let cfg = PmConfig::default();
        let n = Vector3::new((0.01f64).cos(), (0.01f64).sin(), 0.2).normalize();
        // AoLP just below 2*pi: branch phi itself is ~0.02 away after wrap.
        let s = score_azimuth(&n, 2.0 * PI - 0.01, 0.5, true, &cfg);
        assert!(s < omega(0.5, cfg.sigma) * 1.01, "wrap not handled: {s}");
    }

    #[test]
    fn invalid_polarization_is_neutral_zero() {
        let cfg = PmConfig::default();
        let n = Vector3::new(1.0, 0.0, 0.0);
        assert_eq!(score_azimuth(&n, 0.3, 0.4, false, &cfg), 0.0);
    }

    #[test]
    fn best_branch_resolves_half_pi_shift() {
        // Candidate azimuth a quarter turn off the AoLP: branch 2 (phi+pi/2).
        assert_eq!(best_branch(0.3, 0.3 + PI / 2.0), 2);
        assert_eq!(best_branch(0.3, 0.3), 1);
        assert_eq!(best_branch(0.3, 0.3 + PI), 3);
        assert_eq!(best_branch(0.3, 0.3 - PI / 2.0), 0);
    }

    fn plane_cam() -> CameraModel {
        use nalgebra::Matrix4;
        CameraModel::new(40.0, 40.0, 16.0, 16.0, 32, 32, Matrix4::identity()).unwrap()
    }

    #[test]
    fn nd_score_zero_on_fronto_parallel_plane() {
        let cam = plane_cam();
        let hyp = Hypothesis {
            depth: 2.0,
            normal: Vector3::new(0.0, 0.0, 1.0),
        };
        let s = score_nd(&cam, 10, 10, &hyp, Some(2.0), Some(2.0));
        assert!(s.abs() < 1e-9, "score {s}");
    }

    #[test]
    fn nd_score_one_for_perpendicular_normal() {
        let cam = plane_cam();
        let hyp = Hypothesis {
            depth: 2.0,
            normal: Vector3::new(1.0, 0.0, 0.0),
        };
        let s = score_nd(&cam, 10, 10, &hyp, Some(2.0), Some(2.0));
        assert_relative_eq!(s, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn photometric_score_prefers_true_depth() {
        let bundle = crate::testutil::plane_bundle(24, 24, 0.0, 0.0);
        let cfg = PmConfig {
            ncc_sigma_color: 1.0,
            ..PmConfig::default()
        };
        let n = Vector3::new(0.0, 0.0, 1.0);
        let mut better = 0usize;
        let mut total = 0usize;
        for y in 6..18 {
            for x in 16..22 {
                let d = bundle.reference().depth.get(x, y, 0);
                let s_true = score_photometric(
                    &bundle,
                    x,
                    y,
                    &Hypothesis { depth: d, normal: n },
                    &cfg,
                );
                let s_off = score_photometric(
                    &bundle,
                    x,
                    y,
                    &Hypothesis {
                        depth: 1.1 * d,
                        normal: n,
                    },
                    &cfg,
                );
                total += 1;
                if s_true < s_off {
                    better += 1;
                }
            }
        }
        assert!(
            better as f64 >= 0.95 * total as f64,
            "true depth preferred on only {better}/{total} pixels"
        );
    }

    #[test]
    fn nd_score_neutral_at_border() {
        let cam = plane_cam();
        let hyp = Hypothesis {
            depth: 2.0,
            normal: Vector3::new(0.0, 0.0, 1.0),
        };
        assert_eq!(score_nd(&cam, 31, 31, &hyp, None, None), 1.0);
    }
}
