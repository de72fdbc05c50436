//! Reflective-region localization from DoLP and intensity.

use polar_core::image::BinaryImage;
use polar_core::{FloatImage, PolarMaps};

use crate::{CorrectError, CorrectionConfig};

#[derive(Debug, Clone)]
pub struct ReflectiveMasks {
    pub specular: BinaryImage,
    pub overexposed: BinaryImage,
    /// Complement of both detectors within the foreground.
    pub non_reflective: BinaryImage,
}

impl ReflectiveMasks {
    pub fn reflective(&self) -> BinaryImage {
        self.specular.or(&self.overexposed)
    }
}

/// Specular: DoLP in [0.3, 1] and max-channel intensity in [160/255, 1].
/// Overexposed: DoLP in [0, 0.1] and the same intensity band. A 3x3
/// morphological opening removes isolated detections. The DoLP ranges are
/// disjoint, so no pixel can land in both masks.
pub fn localize_reflective(
    polar: &PolarMaps,
    intensity: &FloatImage,
    cfg: &CorrectionConfig,
) -> Result<ReflectiveMasks, CorrectError> {
    if polar.dolp.width() != intensity.width() || polar.dolp.height() != intensity.height() {
        return Err(CorrectError::Dimension(
            "polar maps and intensity must share dimensions".into(),
        ));
    }
    let (w, h) = (intensity.width(), intensity.height());
    let mut specular = BinaryImage::new(w, h);
    let mut overexposed = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let maxc = (0..intensity.channels())
                .map(|c| intensity.get(x, y, c))
                .fold(f64::MIN, f64::max);
            if !(cfg.intensity_min..=1.0).contains(&maxc) {
                continue;
            }
            let rho = polar.dolp.get(x, y, 0);
            let bright = polar.valid.get(x, y) || rho == 0.0;
            if !bright {
                continue;
            }
            if (cfg.dolp_spec_min..=1.0).contains(&rho) {
                specular.set(x, y, true);
            } else if rho <= cfg.dolp_over_max {
                overexposed.set(x, y, true);
            }
        }
    }
    let specular = opening(&specular);
    let overexposed = opening(&overexposed);
    debug_assert_eq!(specular.and(&overexposed).count(), 0);

    // Foreground: pixels with a meaningful polarization state or bright
    // enough to have been detected.
    let mut foreground = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let lit = (0..intensity.channels()).any(|c| intensity.get(x, y, c) > polar_core::EPS_DARK);
            foreground.set(x, y, polar.valid.get(x, y) || lit);
        }
    }
    let non_reflective = foreground.and(&specular.or(&overexposed).not());
    Ok(ReflectiveMasks {
        specular,
        overexposed,
        non_reflective,
    })
}

fn erode(mask: &BinaryImage) -> BinaryImage {
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        all = false;
                        break 'nb;
                    }
                    if !mask.get(nx as usize, ny as usize) {
                        all = false;
                        break 'nb;
                    }
                }
            }
            out.set(x, y, all);
        }
    }
    out
}

fn dilate(mask: &BinaryImage) -> BinaryImage {
    let (w, h) = (mask.width(), mask.height());
    let mut out = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut any = false;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 && mask.get(nx as usize, ny as usize)
                    {
                        any = true;
                        break 'nb;
                    }
                }
            }
            out.set(x, y, any);
        }
    }
    out
}

/// 3x3 opening (erosion then dilation).
pub fn opening(mask: &BinaryImage) -> BinaryImage {
    dilate(&erode(mask))
}
