//! Training losses: color (non-reflective + reflective), normal consistency,
//! depth-normal smoothness, scale flattening, and the gated total.

use nalgebra::{Vector2, Vector3};
use photo_correct::crm::CrmSet;
use photo_correct::loss::{masked_l1, reflective_loss};
use photo_correct::masks::ReflectiveMasks;
use photo_correct::ssim::dssim_masked;
use photo_correct::CorrectionConfig;
use polar_core::{CameraModel, FloatImage};

use crate::gaussian::GaussianCloud;
use crate::SplatError;

/// L_c = L_non + lambda_ref * L_ref. L_non is the (1 - lambda_dssim) * L1 +
/// lambda_dssim * D-SSIM blend over the non-reflective mask; L_ref supervises
/// the reflective regions against the refinement maps.
pub fn loss_color(
    render: &FloatImage,
    target: &FloatImage,
    crm: &CrmSet,
    masks: &ReflectiveMasks,
    lambda_ref: f64,
    lambda_dssim: f64,
) -> Result<f64, SplatError> {
    if !render.same_shape(target) {
        return Err(SplatError::Dimension("render/target size mismatch".into()));
    }
    let l1 = masked_l1(render, target, &masks.non_reflective)?;
    let d = if lambda_dssim > 0.0 && masks.non_reflective.count() > 0 {
        dssim_masked(render, target, &masks.non_reflective)?
    } else {
        0.0
    };
    let l_non = (1.0 - lambda_dssim) * l1 + lambda_dssim * d;
    if lambda_ref == 0.0 {
        return Ok(l_non);
    }
    let cfg = CorrectionConfig {
        lambda_dssim,
        ..CorrectionConfig::default()
    };
    let l_ref = reflective_loss(render, crm, masks, &cfg)?;
    Ok(l_non + lambda_ref * l_ref)
}

/// Mean over valid pixels of the channel-summed absolute normal difference.
/// A pixel is valid when both maps carry a non-degenerate vector; opposite
/// unit normals contribute 2.
pub fn loss_normal(normal: &FloatImage, n_opt: &FloatImage) -> Result<f64, SplatError> {
    if !normal.same_shape(n_opt) {
        return Err(SplatError::Dimension("normal map size mismatch".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..normal.height() {
        for x in 0..normal.width() {
            let a = normal.pixel(x, y);
            let b = n_opt.pixel(x, y);
            let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na < 1e-9 || nb < 1e-9 {
                continue;
            }
            total += a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Depth-normal consistency: the weighted mean over interior pixels of
/// 1 - (gradient normal . rendered normal). The gradient normal comes from
/// backprojecting the four neighbors and crossing the central differences;
/// pixels whose stencil touches invalid (zero) depth are skipped. Normals are
/// expected in the view frame (y up, z toward the camera).
pub fn loss_depth_normal(
    depth: &FloatImage,
    normal: &FloatImage,
    weights: &FloatImage,
    cam: &CameraModel,
) -> Result<f64, SplatError> {
    if depth.width() != normal.width()
        || depth.height() != normal.height()
        || !depth.same_size(weights)
    {
        return Err(SplatError::Dimension("depth/normal/weight size mismatch".into()));
    }
    let (w, h) = (depth.width(), depth.height());
    let point = |x: usize, y: usize| -> Option<Vector3<f64>> {
        let d = depth.get(x, y, 0);
        if d <= 0.0 {
            return None;
        }
        let p = cam
            .backproject_camera(&Vector2::new(x as f64, y as f64), d)
            .ok()?;
        Some(p.coords)
    };
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for y in 1..h.saturating_sub(1) {
        for x in 1..w - 1 {
            let wgt = weights.get(x, y, 0);
            if wgt <= 0.0 {
                continue;
            }
            let (Some(_pc), Some(pl), Some(pr), Some(pu), Some(pd)) = (
                point(x, y),
                point(x - 1, y),
                point(x + 1, y),
                point(x, y - 1),
                point(x, y + 1),
            ) else {
                continue;
            };
            let gx = pr - pl;
            let gy = pd - pu;
            let mut n_cam = gx.cross(&gy);
            let len = n_cam.norm();
            if len < 1e-12 {
                continue;
            }
            n_cam /= len;
            // Camera frame -> view frame, oriented toward the camera.
            let mut n_grad = CameraModel::FLIP * n_cam;
            if n_grad.z < 0.0 {
                n_grad = -n_grad;
            }
            let mut n = Vector3::new(normal.get(x, y, 0), normal.get(x, y, 1), normal.get(x, y, 2));
            let n_len = n.norm();
            if n_len < 1e-12 {
                continue;
            }
            n /= n_len;
            total += wgt * (1.0 - n_grad.dot(&n));
            weight_sum += wgt;
        }
    }
    if weight_sum == 0.0 {
        return Ok(0.0);
    }
    Ok(total / weight_sum)
}

/// Mean over Gaussians of the smallest scale axis (drives splats flat).
pub fn loss_scale(cloud: &GaussianCloud) -> Result<f64, SplatError> {
    if cloud.is_empty() {
        return Err(SplatError::EmptyCloud);
    }
    let sum: f64 = cloud.gaussians.iter().map(|g| g.min_axis().1).sum();
    Ok(sum / cloud.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct LossParts {
    pub color: f64,
    pub normal: f64,
    pub depth_normal: f64,
    pub scale: f64,
}

/// Depth-normal smoothing stays off for the first 7000 steps.
pub const DEPTH_NORMAL_GATE_STEP: usize = 7000;

/// L = L_c + alpha L_n + beta L_dn [step >= 7000] + gamma L_scale.
pub fn total_loss(parts: &LossParts, alpha: f64, beta: f64, gamma: f64, step: usize) -> f64 {
    let gate = if step >= DEPTH_NORMAL_GATE_STEP { 1.0 } else { 0.0 };
    parts.color + alpha * parts.normal + beta * parts.depth_normal * gate + gamma * parts.scale
}
