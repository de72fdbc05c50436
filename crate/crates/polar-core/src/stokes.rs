//! Linear-polarization Stokes math: four analyzer angles in, (s0, s1, s2)
//! out, plus the derived AoLP/DoLP maps and the s0/2 intensity image.

use crate::camera::CameraModel;
use crate::error::CoreError;
use crate::image::{BinaryImage, FloatImage};
use crate::EPS_DARK;

/// Four-angle polarized capture of one view (analyzers at 0/45/90/135 deg).
#[derive(Debug, Clone)]
pub struct PolarizedCapture {
    pub view_id: u32,
    /// Angle images in order 0, 45, 90, 135 degrees; H x W x 3 linear
    /// intensities in [0, 1].
    pub images: [FloatImage; 4],
    pub camera: CameraModel,
}

impl PolarizedCapture {
    pub fn validate(&self) -> Result<(), CoreError> {
        let first = &self.images[0];
        for img in &self.images[1..] {
            if !img.same_shape(first) {
                return Err(CoreError::Dimension(
                    "angle images must share dimensions".into(),
                ));
            }
        }
        for img in &self.images {
            if img.data().iter().any(|v| !v.is_finite()) {
                return Err(CoreError::Data("non-finite intensity".into()));
            }
            if img.data().iter().any(|&v| v < 0.0) {
                return Err(CoreError::Data("negative intensity".into()));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.images[0].width()
    }

    pub fn height(&self) -> usize {
        self.images[0].height()
    }
}

/// Per-pixel, per-channel linear Stokes components.
#[derive(Debug, Clone)]
pub struct StokesImage {
    pub s0: FloatImage,
    pub s1: FloatImage,
    pub s2: FloatImage,
}

/// AoLP/DoLP computed on the luminance-averaged Stokes channels.
#[derive(Debug, Clone)]
pub struct PolarMaps {
    /// Radians in [0, pi).
    pub aolp: FloatImage,
    /// Dimensionless in [0, 1].
    pub dolp: FloatImage,
    /// False where the pixel is too dark or too weakly polarized for a
    /// meaningful angle.
    pub valid: BinaryImage,
}

/// Inverts the Malus-law forward model per channel:
/// s0 = I0 + I90, s1 = I0 - I90, s2 = I45 - I135.
///
/// Sensor noise routinely violates s1^2 + s2^2 <= s0^2 slightly, so the
/// linear components are scaled down to restore physical consistency rather
/// than rejected.
pub fn stokes_from_angles(capture: &PolarizedCapture) -> Result<StokesImage, CoreError> {
    capture.validate()?;
    let (w, h) = (capture.width(), capture.height());
    let ch = capture.images[0].channels();
    let mut s0 = FloatImage::new(w, h, ch);
    let mut s1 = FloatImage::new(w, h, ch);
    let mut s2 = FloatImage::new(w, h, ch);
    let [i0, i45, i90, i135] = &capture.images;
    for i in 0..w * h * ch {
        let a0 = i0.data()[i];
        let a45 = i45.data()[i];
        let a90 = i90.data()[i];
        let a135 = i135.data()[i];
        let t0 = a0 + a90;
        let mut t1 = a0 - a90;
        let mut t2 = a45 - a135;
        let lin = (t1 * t1 + t2 * t2).sqrt();
        if lin > t0 && lin > 0.0 {
            let k = t0 / lin;
            t1 *= k;
            t2 *= k;
        }
        s0.data_mut()[i] = t0;
        s1.data_mut()[i] = t1;
        s2.data_mut()[i] = t2;
    }
    Ok(StokesImage { s0, s1, s2 })
}

/// AoLP phi = atan2(s2, s1) / 2 wrapped to [0, pi); DoLP rho = |s_lin| / s0.
/// Both are computed on the channel-averaged Stokes components.
pub fn aolp_dolp(stokes: &StokesImage) -> PolarMaps {
    let (w, h) = (stokes.s0.width(), stokes.s0.height());
    let mut aolp = FloatImage::new(w, h, 1);
    let mut dolp = FloatImage::new(w, h, 1);
    let mut valid = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let s0 = stokes.s0.luminance(x, y);
            let s1 = stokes.s1.luminance(x, y);
            let s2 = stokes.s2.luminance(x, y);
            let lin = (s1 * s1 + s2 * s2).sqrt();
            if s0 < EPS_DARK || lin < EPS_DARK {
                continue; // aolp = 0, dolp = 0, invalid
            }
            let mut phi = 0.5 * s2.atan2(s1);
            if phi < 0.0 {
                phi += std::f64::consts::PI;
            }
            if phi >= std::f64::consts::PI {
                phi -= std::f64::consts::PI;
            }
            aolp.set(x, y, 0, phi);
            dolp.set(x, y, 0, (lin / s0).min(1.0));
            valid.set(x, y, true);
        }
    }
    PolarMaps { aolp, dolp, valid }
}

/// s0 / 2 per channel, clamped to [0, 1]; the standard color input image.
pub fn intensity_image(stokes: &StokesImage) -> FloatImage {
    stokes.s0.map(|v| (v * 0.5).clamp(0.0, 1.0))
}

/// Malus-law forward model: the intensity seen through an analyzer at
/// `angle` radians for a pixel with total Stokes intensity s0, DoLP rho and
/// AoLP phi is (s0/2) * (1 + rho * cos(2 * (angle - phi))).
pub fn malus_intensity(s0: f64, rho: f64, phi: f64, angle: f64) -> f64 {
    0.5 * s0 * (1.0 + rho * (2.0 * (angle - phi)).cos())
}
