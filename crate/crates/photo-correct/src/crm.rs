//! Polarimetric Reference Intensity and the Color Refinement Maps.

use polar_core::image::BinaryImage;
use polar_core::{FloatImage, PolarizedCapture, StokesImage};

use crate::masks::ReflectiveMasks;
use crate::{CorrectError, CorrectionConfig};

/// PRI plus the refinement maps derived from it.
#[derive(Debug, Clone)]
pub struct CrmSet {
    /// Angle-averaged PRI (H x W).
    pub pri: FloatImage,
    /// Specular-highlight refinement target (H x W x 3).
    pub i_diff: FloatImage,
    /// Overexposure refinement target (H x W x 3).
    pub i_chro: FloatImage,
    /// Propagated diffuse color (H x W x 3).
    pub i_prop: FloatImage,
    /// True where propagation found a donor.
    pub prop_valid: BinaryImage,
}

/// Per-pixel max(R,G,B) - min(R,G,B) of each angle image, averaged uniformly
/// over the four analyzer angles. Channel-constant specular offsets cancel
/// exactly, which makes the result a reflection-invariant diffuse key.
pub fn compute_pri(capture: &PolarizedCapture) -> FloatImage {
    let (w, h) = (capture.width(), capture.height());
    let mut pri = FloatImage::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for img in &capture.images {
                let p = img.pixel(x, y);
                let maxc = p.iter().copied().fold(f64::MIN, f64::max);
                let minc = p.iter().copied().fold(f64::MAX, f64::min);
                acc += maxc - minc;
            }
            pri.set(x, y, 0, acc / 4.0);
        }
    }
    pri
}

/// I_diff = (s0 - (I_max - I_min)) / 2 per channel, where I_max/I_min are the
/// per-pixel extrema over the four angle images; clamped at zero.
pub fn compute_idiff(capture: &PolarizedCapture, stokes: &StokesImage) -> FloatImage {
    let (w, h) = (capture.width(), capture.height());
    let ch = capture.images[0].channels();
    let mut out = FloatImage::new(w, h, ch);
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let vals = [
                    capture.images[0].get(x, y, c),
                    capture.images[1].get(x, y, c),
                    capture.images[2].get(x, y, c),
                    capture.images[3].get(x, y, c),
                ];
                let imax = vals.iter().copied().fold(f64::MIN, f64::max);
                let imin = vals.iter().copied().fold(f64::MAX, f64::min);
                let s0 = stokes.s0.get(x, y, c);
                out.set(x, y, c, (0.5 * (s0 - (imax - imin))).max(0.0));
            }
        }
    }
    out
}

/// Transfers I_diff from non-reflective pixels into reflective ones.
///
/// Donors are searched in outward square rings up to `search_radius`; the
/// first ring containing a pixel whose PRI is within the Mahalanobis gate
/// (scalar PRI variance over the non-reflective population) supplies the
/// donor, closest-in-PRI within that ring.
pub fn propagate_diffuse(
    i_diff: &FloatImage,
    pri: &FloatImage,
    masks: &ReflectiveMasks,
    cfg: &CorrectionConfig,
) -> Result<(FloatImage, BinaryImage), CorrectError> {
    let (w, h) = (pri.width(), pri.height());
    let n_non = masks.non_reflective.count();
    if n_non == 0 {
        return Err(CorrectError::Unavailable(
            "no non-reflective pixels to propagate from".into(),
        ));
    }
    // Scalar PRI statistics over the non-reflective population.
    let mut mean = 0.0;
    for y in 0..h {
        for x in 0..w {
            if masks.non_reflective.get(x, y) {
                mean += pri.get(x, y, 0);
            }
        }
    }
    mean /= n_non as f64;
    let mut var = 0.0;
    for y in 0..h {
        for x in 0..w {
            if masks.non_reflective.get(x, y) {
                let d = pri.get(x, y, 0) - mean;
                var += d * d;
            }
        }
    }
    var /= n_non as f64;
    let sigma = var.sqrt().max(1e-12);

    let reflective = masks.reflective();
    let mut i_prop = i_diff.clone();
    let mut prop_valid = BinaryImage::filled(w, h, true);
    for y in 0..h {
        for x in 0..w {
            if !reflective.get(x, y) {
                continue;
            }
            let target_pri = pri.get(x, y, 0);
            let mut donor: Option<(f64, usize, usize)> = None;
            'rings: for r in 1..=cfg.search_radius as i64 {
                for (nx, ny) in ring_pixels(x as i64, y as i64, r, w, h) {
                    if !masks.non_reflective.get(nx, ny) {
                        continue;
                    }
                    let d = (pri.get(nx, ny, 0) - target_pri).abs() / sigma;
                    if d < cfg.mahalanobis_max && donor.map_or(true, |(best, _, _)| d < best) {
                        donor = Some((d, nx, ny));
                    }
                }
                if donor.is_some() {
                    break 'rings;
                }
            }
            match donor {
                Some((_, nx, ny)) => {
                    for c in 0..i_diff.channels() {
                        i_prop.set(x, y, c, i_diff.get(nx, ny, c));
                    }
                }
                None => {
                    prop_valid.set(x, y, false);
                }
            }
        }
    }
    Ok((i_prop, prop_valid))
}

/// Pixels on the square ring of radius r around (cx, cy), clipped to bounds,
/// in deterministic scan order.
fn ring_pixels(cx: i64, cy: i64, r: i64, w: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((8 * r) as usize);
    let mut push = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w as i64 && y < h as i64 {
            out.push((x as usize, y as usize));
        }
    };
    for x in cx - r..=cx + r {
        push(x, cy - r);
        push(x, cy + r);
    }
    for y in cy - r + 1..cy + r {
        push(cx - r, y);
        push(cx + r, y);
    }
    out
}

/// I_chro = rho_d * I_prop / (sum_channels I_prop + mean_channels I_diff),
/// with the denominator guarded at 1e-8.
pub fn compute_ichro(i_prop: &FloatImage, i_diff: &FloatImage, cfg: &CorrectionConfig) -> FloatImage {
    let (w, h) = (i_prop.width(), i_prop.height());
    let ch = i_prop.channels();
    let mut out = FloatImage::new(w, h, ch);
    for y in 0..h {
        for x in 0..w {
            let sum_prop: f64 = i_prop.pixel(x, y).iter().sum();
            let mean_diff: f64 = i_diff.pixel(x, y).iter().sum::<f64>() / ch as f64;
            let denom = (sum_prop + mean_diff).max(1e-8);
            for c in 0..ch {
                out.set(x, y, c, cfg.rho_d * i_prop.get(x, y, c) / denom);
            }
        }
    }
    out
}

/// Runs the full CRM construction for one view.
pub fn build_crm_set(
    capture: &PolarizedCapture,
    stokes: &StokesImage,
    masks: &ReflectiveMasks,
    cfg: &CorrectionConfig,
) -> Result<CrmSet, CorrectError> {
    let pri = compute_pri(capture);
    let i_diff = compute_idiff(capture, stokes);
    let (i_prop, prop_valid) = propagate_diffuse(&i_diff, &pri, masks, cfg)?;
    let i_chro = compute_ichro(&i_prop, &i_diff, cfg);
    Ok(CrmSet {
        pri,
        i_diff,
        i_chro,
        i_prop,
        prop_valid,
    })
}
