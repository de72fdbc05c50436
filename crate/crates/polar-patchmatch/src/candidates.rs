//! View bundles, AoLP-derived normal candidates, and hypothesis
//! initialization.

use nalgebra::Vector3;
use polar_core::image::BinaryImage;
use polar_core::{CameraModel, FloatImage, PolarMaps};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::{PmConfig, PmError};

/// One calibrated view with its photometric and polarimetric inputs plus the
/// initial depth/normal estimates (rendered from the current cloud, or a
/// corrupted oracle stand-in).
#[derive(Debug, Clone)]
pub struct PmView {
    pub camera: CameraModel,
    /// Observed intensity (s0/2), H x W x 3.
    pub image: FloatImage,
    /// Image with reflective regions replaced by their refinement maps.
    pub crm_image: FloatImage,
    /// Reflective-region mask.
    pub reflective: BinaryImage,
    pub polar: PolarMaps,
    /// Initial depth; 0 marks holes.
    pub depth: FloatImage,
    /// Initial unit normals in this view's frame; zero marks holes.
    pub normal: FloatImage,
    /// Pixels whose matching window holds enough reflective pixels that
    /// matching should read `crm_image` (precomputed in `ViewBundle::new`).
    pub use_crm: BinaryImage,
    /// Cached luminance of `image` (precomputed in `ViewBundle::new`).
    pub luma: FloatImage,
    /// Cached luminance of `crm_image` (precomputed in `ViewBundle::new`).
    pub crm_luma: FloatImage,
}

fn luminance_image(img: &FloatImage) -> FloatImage {
    let mut out = FloatImage::new(img.width(), img.height(), 1);
    for y in 0..img.height() {
        for x in 0..img.width() {
            out.set(x, y, 0, img.luminance(x, y));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ViewBundle {
    pub views: Vec<PmView>,
    /// Index of the reference view.
    pub reference: usize,
}

impl ViewBundle {
    /// Builds the bundle and precomputes the per-view CRM-substitution map
    /// (box-filtered reflective count over the matching window).
    pub fn new(
        mut views: Vec<PmView>,
        reference: usize,
        cfg: &PmConfig,
    ) -> Result<Self, PmError> {
        if views.is_empty() || reference >= views.len() {
            return Err(PmError::Init("bundle needs views and a valid reference index".into()));
        }
        for v in views.iter_mut() {
            v.use_crm = crm_window_map(&v.reflective, cfg);
            v.luma = luminance_image(&v.image);
            v.crm_luma = luminance_image(&v.crm_image);
        }
        Ok(Self { views, reference })
    }

    pub fn reference(&self) -> &PmView {
        &self.views[self.reference]
    }

    pub fn sources(&self) -> impl Iterator<Item = &PmView> {
        self.views
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.reference)
            .map(|(_, v)| v)
    }
}

/// Pixels whose centered window contains more than `threshold` reflective
/// pixels, via a summed-area table.
fn crm_window_map(reflective: &BinaryImage, cfg: &PmConfig) -> BinaryImage {
    let (w, h) = (reflective.width(), reflective.height());
    let mut sat = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            sat[(y + 1) * (w + 1) + (x + 1)] = sat[y * (w + 1) + (x + 1)]
                + sat[(y + 1) * (w + 1) + x]
                - sat[y * (w + 1) + x]
                + reflective.get(x, y) as u32;
        }
    }
    let r = (cfg.ncc_window / 2) as i64;
    let mut out = BinaryImage::new(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let x0 = (x - r).max(0) as usize;
            let y0 = (y - r).max(0) as usize;
            let x1 = ((x + r).min(w as i64 - 1) + 1) as usize;
            let y1 = ((y + r).min(h as i64 - 1) + 1) as usize;
            let count = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0]
                - sat[y0 * (w + 1) + x1]
                - sat[y1 * (w + 1) + x0];
            out.set(x as usize, y as usize, count as usize > cfg.reflective_pixel_threshold);
        }
    }
    out
}

/// Depth/normal hypothesis in the reference view (normal in view frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub depth: f64,
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone)]
pub struct HypothesisField {
    pub width: usize,
    pub height: usize,
    /// Initial candidate list per pixel (row-major).
    pub candidates: Vec<Vec<Hypothesis>>,
    pub best: Vec<Hypothesis>,
    pub best_cost: Vec<f64>,
    pub valid: Vec<bool>,
}

impl HypothesisField {
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn depth_map(&self) -> FloatImage {
        let mut out = FloatImage::new(self.width, self.height, 1);
        for i in 0..self.best.len() {
            out.data_mut()[i] = self.best[i].depth;
        }
        out
    }

    pub fn normal_map(&self) -> FloatImage {
        let mut out = FloatImage::new(self.width, self.height, 3);
        for (i, h) in self.best.iter().enumerate() {
            for c in 0..3 {
                out.data_mut()[i * 3 + c] = h.normal[c];
            }
        }
        out
    }
}

/// The four azimuth branches {phi - pi/2, phi, phi + pi/2, phi + pi} mod 2pi.
pub fn aolp_candidates(phi: f64) -> [f64; 4] {
    [
        (phi - PI / 2.0).rem_euclid(2.0 * PI),
        phi.rem_euclid(2.0 * PI),
        (phi + PI / 2.0).rem_euclid(2.0 * PI),
        (phi + PI).rem_euclid(2.0 * PI),
    ]
}

/// Unit normal (sin t cos p, sin t sin p, cos t) in the view frame from an
/// azimuth branch and the zenith of the current normal estimate.
pub fn normal_from_aolp(phi_i: f64, theta: f64) -> Vector3<f64> {
    Vector3::new(
        theta.sin() * phi_i.cos(),
        theta.sin() * phi_i.sin(),
        theta.cos(),
    )
}

/// Zenith clamp keeping AoLP candidates clear of grazing degeneracy.
pub const ZENITH_MAX: f64 = PI / 2.0 - 1e-3;
/// Zenith fallback when the initial normal is a hole.
pub const ZENITH_FALLBACK: f64 = PI / 4.0;

/// Builds the 10-candidate hypothesis set per pixel:
/// {(d, n), (d_prt, n), (d, n_aolp_i), (d_prt, n_aolp_i)} for i = 1..4.
/// Hole pixels draw d uniformly from the valid depth range; the RNG stream
/// is content-independent (every pixel consumes the same number of draws).
pub fn init_hypotheses(bundle: &ViewBundle, cfg: &PmConfig) -> Result<HypothesisField, PmError> {
    let r = bundle.reference();
    let (w, h) = (r.depth.width(), r.depth.height());
    let valid_depths: Vec<f64> = r.depth.data().iter().copied().filter(|&d| d > 0.0).collect();
    if valid_depths.is_empty() {
        return Err(PmError::Init("initial depth map is entirely empty".into()));
    }
    let (dmin, dmax) = valid_depths
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut candidates = Vec::with_capacity(w * h);
    let mut best = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            // Fixed draw count per pixel keeps the stream content-independent.
            let u_prt: f64 = rng.gen_range(-1.0..1.0);
            let u_hole: f64 = rng.gen_range(0.0..1.0);
            let d0 = r.depth.get(x, y, 0);
            let d = if d0 > 0.0 {
                d0
            } else {
                dmin + u_hole * (dmax - dmin)
            };
            let d_prt = d * (1.0 + cfg.perturb_rel * u_prt);

            let np = r.normal.pixel(x, y);
            let n_raw = Vector3::new(np[0], np[1], np[2]);
            let (n, theta) = if n_raw.norm() > 1e-6 {
                let n = n_raw.normalize();
                (n, n.z.clamp(-1.0, 1.0).acos().clamp(0.0, ZENITH_MAX))
            } else {
                (Vector3::new(0.0, 0.0, 1.0), ZENITH_FALLBACK)
            };
            let mut list = Vec::with_capacity(10);
            list.push(Hypothesis { depth: d, normal: n });
            list.push(Hypothesis { depth: d_prt, normal: n });
            if r.polar.valid.get(x, y) {
                for phi_i in aolp_candidates(r.polar.aolp.get(x, y, 0)) {
                    let na = normal_from_aolp(phi_i, theta);
                    list.push(Hypothesis { depth: d, normal: na });
                    list.push(Hypothesis { depth: d_prt, normal: na });
                }
            }
            best.push(list[0]);
            candidates.push(list);
            valid.push(d0 > 0.0);
        }
    }
    Ok(HypothesisField {
        width: w,
        height: h,
        candidates,
        best,
        best_cost: vec![f64::INFINITY; w * h],
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn aolp_branches_at_zero() {
        let c = aolp_candidates(0.0);
        assert_relative_eq!(c[0], 3.0 * PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(c[2], PI / 2.0, epsilon = 1e-12);
        assert_relative_eq!(c[3], PI, epsilon = 1e-12);
    }

    #[test]
    fn aolp_branches_at_quarter_pi() {
        let c = aolp_candidates(PI / 4.0);
        let want = [7.0 * PI / 4.0, PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0];
        for (a, b) in c.iter().zip(want) {
            assert_relative_eq!(a, &b, epsilon = 1e-12);
        }
    }

    #[test]
    fn aolp_branches_quarter_turn_apart() {
        for phi in [0.3, 1.7, 2.9] {
            let c = aolp_candidates(phi);
            for i in 0..4 {
                for j in i + 1..4 {
                    let d = (c[i] - c[j]).rem_euclid(2.0 * PI);
                    let steps = d / (PI / 2.0);
                    assert_relative_eq!(steps, steps.round(), epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn normal_from_aolp_known_values() {
        let n = normal_from_aolp(1.234, 0.0);
        assert_relative_eq!((n - Vector3::new(0.0, 0.0, 1.0)).norm(), 0.0, epsilon = 1e-12);
        let n = normal_from_aolp(0.0, PI / 2.0);
        assert_relative_eq!((n - Vector3::new(1.0, 0.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
        let n = normal_from_aolp(PI / 2.0, PI / 4.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!((n - Vector3::new(0.0, s, s)).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_from_aolp_is_unit() {
        for phi in [0.0, 1.0, 3.0, 6.0] {
            for theta in [0.0, 0.5, 1.2, ZENITH_MAX] {
                assert_relative_eq!(normal_from_aolp(phi, theta).norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    fn tiny_bundle(depth_fill: f64) -> ViewBundle {
        use nalgebra::Matrix4;
        let (w, h) = (6, 6);
        let cam = CameraModel::new(10.0, 10.0, 3.0, 3.0, w, h, Matrix4::identity()).unwrap();
        // Tilted so the zenith is nonzero and the AoLP branches stay distinct.
        let mut normal = FloatImage::new(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                normal.set(x, y, 0, 0.6);
                normal.set(x, y, 2, 0.8);
            }
        }
        let view = PmView {
            camera: cam,
            image: FloatImage::filled(w, h, 3, 0.5),
            crm_image: FloatImage::filled(w, h, 3, 0.5),
            reflective: BinaryImage::new(w, h),
            polar: PolarMaps {
                aolp: FloatImage::filled(w, h, 1, 0.7),
                dolp: FloatImage::filled(w, h, 1, 0.4),
                valid: BinaryImage::filled(w, h, true),
            },
            depth: FloatImage::filled(w, h, 1, depth_fill),
            normal,
            use_crm: BinaryImage::new(w, h),
            luma: FloatImage::new(w, h, 1),
            crm_luma: FloatImage::new(w, h, 1),
        };
        ViewBundle::new(vec![view], 0, &PmConfig::default()).unwrap()
    }

    #[test]
    fn ten_candidates_per_valid_pixel() {
        let bundle = tiny_bundle(2.0);
        let field = init_hypotheses(&bundle, &PmConfig::default()).unwrap();
        assert!(field.candidates.iter().all(|c| c.len() == 10));
    }

    #[test]
    fn zero_perturbation_collapses_to_five_distinct() {
        let bundle = tiny_bundle(2.0);
        let cfg = PmConfig {
            perturb_rel: 0.0,
            ..PmConfig::default()
        };
        let field = init_hypotheses(&bundle, &cfg).unwrap();
        let list = &field.candidates[0];
        let mut distinct: Vec<&Hypothesis> = Vec::new();
        for hyp in list {
            if !distinct.iter().any(|d| **d == *hyp) {
                distinct.push(hyp);
            }
        }
        assert_eq!(distinct.len(), 5);
    }

    #[test]
    fn hole_pixels_sample_valid_range_deterministically() {
        let mut bundle = tiny_bundle(2.0);
        bundle.views[0].depth.set(2, 2, 0, 0.0);
        bundle.views[0].depth.set(4, 1, 0, 3.0);
        let cfg = PmConfig::default();
        let f1 = init_hypotheses(&bundle, &cfg).unwrap();
        let f2 = init_hypotheses(&bundle, &cfg).unwrap();
        let i = f1.idx(2, 2);
        let d = f1.candidates[i][0].depth;
        assert!((2.0..=3.0).contains(&d), "hole depth {d} outside valid range");
        assert_eq!(d.to_bits(), f2.candidates[i][0].depth.to_bits());
        assert!(!f1.valid[i]);
    }

    #[test]
    fn empty_depth_is_an_error() {
        let bundle = tiny_bundle(0.0);
        assert!(init_hypotheses(&bundle, &PmConfig::default()).is_err());
    }

    #[test]
    fn crm_window_map_flags_dense_regions_only() {
        let (w, h) = (32, 32);
        let mut reflective = BinaryImage::new(w, h);
        for y in 10..22 {
            for x in 10..22 {
                reflective.set(x, y, true);
            }
        }
        let cfg = PmConfig::default(); // 11x11 window, threshold 30
        let map = crm_window_map(&reflective, &cfg);
        assert!(map.get(15, 15), "center of the blob must substitute");
        assert!(!map.get(2, 2), "far corner must not substitute");
    }
}
