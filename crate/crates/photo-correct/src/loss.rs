//! Reflective-aware photometric loss against the Color Refinement Maps.

use polar_core::image::BinaryImage;
use polar_core::FloatImage;

use crate::crm::CrmSet;
use crate::masks::ReflectiveMasks;
use crate::ssim::dssim_masked;
use crate::{CorrectError, CorrectionConfig};

/// Mean absolute difference over the masked pixels (averaged over pixels and
/// channels). Returns 0 for an empty mask.
pub fn masked_l1(a: &FloatImage, b: &FloatImage, mask: &BinaryImage) -> Result<f64, CorrectError> {
    if !a.same_shape(b) || a.width() != mask.width() || a.height() != mask.height() {
        return Err(CorrectError::Dimension("masked_l1 inputs must match".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..a.height() {
        for x in 0..a.width() {
            if !mask.get(x, y) {
                continue;
            }
            for c in 0..a.channels() {
                total += (a.get(x, y, c) - b.get(x, y, c)).abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

fn blend_loss(
    render: &FloatImage,
    target: &FloatImage,
    mask: &BinaryImage,
    lambda_dssim: f64,
) -> Result<f64, CorrectError> {
    if mask.count() == 0 {
        return Ok(0.0);
    }
    let l1 = masked_l1(render, target, mask)?;
    let d = if lambda_dssim > 0.0 {
        dssim_masked(render, target, mask)?
    } else {
        0.0
    };
    Ok((1.0 - lambda_dssim) * l1 + lambda_dssim * d)
}

/// L_ref = L_s(render, I_diff) over the specular mask plus
/// L_o(render, I_chro) over the overexposed mask, each an
/// (1 - lambda) * L1 + lambda * D-SSIM blend. Pixels whose diffuse
/// propagation failed (prop_valid = false) are excluded; empty masks
/// contribute zero.
pub fn reflective_loss(
    render: &FloatImage,
    crm: &CrmSet,
    masks: &ReflectiveMasks,
    cfg: &CorrectionConfig,
) -> Result<f64, CorrectError> {
    let spec = masks.specular.and(&crm.prop_valid);
    let over = masks.overexposed.and(&crm.prop_valid);
    let l_s = blend_loss(render, &crm.i_diff, &spec, cfg.lambda_dssim)?;
    let l_o = blend_loss(render, &crm.i_chro, &over, cfg.lambda_dssim)?;
    Ok(l_s + l_o)
}
