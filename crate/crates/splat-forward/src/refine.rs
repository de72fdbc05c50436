//! Color/opacity refinement of reflective Gaussians against correction
//! targets. Geometry (positions, covariances, contributor footprints) stays
//! frozen, which makes the blend a closed-form function of the colors and
//! opacities and its gradient exactly computable.

use photo_correct::crm::CrmSet;
use photo_correct::masks::ReflectiveMasks;
use polar_core::{CameraModel, FloatImage};

use crate::gaussian::GaussianCloud;
use crate::render::{render, ALPHA_CLIP};
use crate::SplatError;

#[derive(Debug, Clone)]
pub struct RefineConfig {
    pub steps: usize,
    pub lr: f64,
    /// Weight of the reflective terms relative to the non-reflective L1.
    pub lambda_ref: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            lr: 0.1,
            lambda_ref: 1.0,
        }
    }
}

/// Per-view supervision: observed intensity for the non-reflective region and
/// refinement maps for the reflective one.
pub struct ViewSupervision<'a> {
    pub camera: &'a CameraModel,
    pub target: &'a FloatImage,
    pub crm: &'a CrmSet,
    pub masks: &'a ReflectiveMasks,
}

/// One supervised pixel with its frozen contributor chain.
struct PixelSup {
    /// (gaussian index, spatial falloff), front to back.
    contribs: Vec<(usize, f64)>,
    target: [f64; 3],
    /// Loss weight of this pixel (mask normalization and term weight folded in).
    weight: f64,
}

/// Marks Gaussians whose rendered footprint touches a reflective pixel in at
/// least one view. Returns how many are flagged.
pub fn tag_reflective(
    cloud: &mut GaussianCloud,
    views: &[ViewSupervision<'_>],
) -> Result<usize, SplatError> {
    for g in cloud.gaussians.iter_mut() {
        g.reflective = false;
    }
    for v in views {
        let r = render(cloud, v.camera)?;
        let (w, h) = (v.camera.width, v.camera.height);
        let reflective = v.masks.reflective();
        for y in 0..h {
            for x in 0..w {
                if !reflective.get(x, y) {
                    continue;
                }
                for c in &r.contributors[y * w + x] {
                    cloud.gaussians[c.index].reflective = true;
                }
            }
        }
    }
    Ok(cloud.gaussians.iter().filter(|g| g.reflective).count())
}

fn collect_pixels(
    cloud: &GaussianCloud,
    views: &[ViewSupervision<'_>],
    lambda_ref: f64,
) -> Result<Vec<PixelSup>, SplatError> {
    let mut pixels = Vec::new();
    for v in views {
        let r = render(cloud, v.camera)?;
        let (w, h) = (v.camera.width, v.camera.height);
        let spec = v.masks.specular.and(&v.crm.prop_valid);
        let over = v.masks.overexposed.and(&v.crm.prop_valid);
        let groups: [(&polar_core::image::BinaryImage, &FloatImage, f64); 3] = [
            (&v.masks.non_reflective, v.target, 1.0),
            (&spec, &v.crm.i_diff, lambda_ref),
            (&over, &v.crm.i_chro, lambda_ref),
        ];
        for (mask, target, term_weight) in groups {
            let count = mask.count();
            if count == 0 || term_weight == 0.0 {
                continue;
            }
            let weight = term_weight / (count * 3) as f64;
            for y in 0..h {
                for x in 0..w {
                    if !mask.get(x, y) {
                        continue;
                    }
                    let contribs = r.contributors[y * w + x]
                        .iter()
                        .map(|c| (c.index, c.falloff))
                        .collect();
                    pixels.push(PixelSup {
                        contribs,
                        target: [target.get(x, y, 0), target.get(x, y, 1), target.get(x, y, 2)],
                        weight,
                    });
                }
            }
        }
    }
    Ok(pixels)
}

fn blend_pixel(p: &PixelSup, cloud: &GaussianCloud) -> [f64; 3] {
    let mut t = 1.0;
    let mut c_out = [0.0; 3];
    for &(i, falloff) in &p.contribs {
        let g = &cloud.gaussians[i];
        let alpha = (g.opacity() * falloff).min(ALPHA_CLIP);
        for k in 0..3 {
            c_out[k] += t * alpha * g.color[k];
        }
        t *= 1.0 - alpha;
    }
    c_out
}

fn objective(pixels: &[PixelSup], cloud: &GaussianCloud) -> f64 {
    let mut total = 0.0;
    for p in pixels {
        let c = blend_pixel(p, cloud);
        total += p.weight * (0..3).map(|k| (c[k] - p.target[k]).abs()).sum::<f64>();
    }
    total
}

/// Analytic gradient of the L1 objective w.r.t. the colors and opacity
/// logits of flagged Gaussians. `slot[i]` maps a Gaussian index to its row in
/// the returned gradient arrays.
fn gradient(
    pixels: &[PixelSup],
    cloud: &GaussianCloud,
    slot: &[Option<usize>],
    n_flagged: usize,
) -> (Vec<[f64; 3]>, Vec<f64>) {
    let mut g_color = vec![[0.0; 3]; n_flagged];
    let mut g_logit = vec![0.0; n_flagged];
    for p in pixels {
        let n = p.contribs.len();
        if n == 0 {
            continue;
        }
        // Forward pass: transmittance before each contributor.
        let mut alphas = Vec::with_capacity(n);
        let mut trans = Vec::with_capacity(n);
        let mut t = 1.0;
        for &(i, falloff) in &p.contribs {
            let g = &cloud.gaussians[i];
            let alpha = (g.opacity() * falloff).min(ALPHA_CLIP);
            alphas.push(alpha);
            trans.push(t);
            t *= 1.0 - alpha;
        }
        let mut c_out = [0.0; 3];
        for (j, &(i, _)) in p.contribs.iter().enumerate() {
            for k in 0..3 {
                c_out[k] += trans[j] * alphas[j] * cloud.gaussians[i].color[k];
            }
        }
        let dldc: [f64; 3] =
            std::array::from_fn(|k| p.weight * (c_out[k] - p.target[k]).signum());
        // Backward pass: suffix sums S_j = sum_{m>j} T_m alpha_m c_m.
        let mut suffix = [0.0; 3];
        for j in (0..n).rev() {
            let (i, falloff) = p.contribs[j];
            let g = &cloud.gaussians[i];
            if let Some(s) = slot[i] {
                let ta = trans[j] * alphas[j];
                for k in 0..3 {
                    g_color[s][k] += dldc[k] * ta;
                }
                // d alpha / d logit, zero where the 0.99 clip is active.
                let o = g.opacity();
                let clipped = o * falloff > ALPHA_CLIP;
                if !clipped {
                    let dalpha = alphas[j] * (1.0 - o);
                    let mut dc_dalpha = 0.0;
                    for k in 0..3 {
                        dc_dalpha += dldc[k]
                            * (trans[j] * g.color[k] - suffix[k] / (1.0 - alphas[j]));
                    }
                    g_logit[s] += dc_dalpha * dalpha;
                }
            }
            for k in 0..3 {
                suffix[k] += trans[j] * alphas[j] * g.color[k];
            }
        }
    }
    (g_color, g_logit)
}

/// The refinement objective with frozen contributor chains. Colors and
/// opacities remain free parameters, so the objective and its analytic
/// gradient are exact closed forms; useful for verifying the gradients
/// against finite differences.
pub struct FrozenObjective {
    pixels: Vec<PixelSup>,
    n: usize,
}

impl FrozenObjective {
    /// Renders `cloud` under every view once and freezes the per-pixel
    /// contributor chains.
    pub fn new(
        cloud: &GaussianCloud,
        views: &[ViewSupervision<'_>],
        lambda_ref: f64,
    ) -> Result<Self, SplatError> {
        Ok(Self {
            pixels: collect_pixels(cloud, views, lambda_ref)?,
            n: cloud.len(),
        })
    }

    /// Objective value using the frozen chains with the colors and opacities
    /// currently stored in `cloud`.
    pub fn value(&self, cloud: &GaussianCloud) -> f64 {
        objective(&self.pixels, cloud)
    }

    /// Analytic gradient w.r.t. every Gaussian's color channels and opacity
    /// logit.
    pub fn gradient(&self, cloud: &GaussianCloud) -> (Vec<[f64; 3]>, Vec<f64>) {
        let slot: Vec<Option<usize>> = (0..self.n).map(Some).collect();
        gradient(&self.pixels, cloud, &slot, self.n)
    }
}

/// Gradient descent with backtracking line search on the colors and opacities
/// of flagged Gaussians. Returns the refined cloud and the per-step loss
/// trace (monotone non-increasing). A cloud without flagged Gaussians is
/// returned unchanged with an empty trace.
pub fn refine_reflective_colors(
    cloud: &GaussianCloud,
    views: &[ViewSupervision<'_>],
    cfg: &RefineConfig,
) -> Result<(GaussianCloud, Vec<f64>), SplatError> {
    if cloud.is_empty() {
        return Err(SplatError::EmptyCloud);
    }
    let mut slot = vec![None; cloud.len()];
    let mut n_flagged = 0;
    for (i, g) in cloud.gaussians.iter().enumerate() {
        if g.reflective {
            slot[i] = Some(n_flagged);
            n_flagged += 1;
        }
    }
    if n_flagged == 0 {
        eprintln!("warning: no reflective gaussians to refine");
        return Ok((cloud.clone(), Vec::new()));
    }
    let pixels = collect_pixels(cloud, views, cfg.lambda_ref)?;
    let mut work = cloud.clone();
    let mut current = objective(&pixels, &work);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    trace.push(current);
    for _ in 0..cfg.steps {
        let (g_color, g_logit) = gradient(&pixels, &work, &slot, n_flagged);
        let mut lr = cfg.lr;
        let mut improved = false;
        for _ in 0..30 {
            let mut trial = work.clone();
            for (i, s) in slot.iter().enumerate() {
                let Some(s) = *s else { continue };
                for k in 0..3 {
                    trial.gaussians[i].color[k] =
                        (trial.gaussians[i].color[k] - lr * g_color[s][k]).clamp(0.0, 1.0);
                }
                let logit = trial.gaussians[i].opacity_logit() - lr * g_logit[s];
                trial.gaussians[i].set_opacity_logit(logit);
            }
            let f = objective(&pixels, &trial);
            if f <= current {
                work = trial;
                current = f;
                improved = true;
                break;
            }
            lr *= 0.5;
        }
        trace.push(current);
        if !improved {
            break;
        }
    }
    Ok((work, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, UnitQuaternion, Vector3};
    use polar_core::image::BinaryImage;
    use rand::{Rng, SeedableRng};

    fn camera() -> CameraModel {
        CameraModel::new(40.0, 40.0, 16.0, 16.0, 32, 32, Matrix4::identity()).unwrap()
    }

    fn random_cloud(seed: u64, n: usize, all_reflective: bool) -> GaussianCloud {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let gaussians = (0..n)
            .map(|_| {
                let mut g = Gaussian::new(
                    Vector3::new(
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(-0.3..0.3),
                        rng.gen_range(1.5..3.0),
                    ),
                    UnitQuaternion::from_euler_angles(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                    Vector3::new(
                        rng.gen_range(0.05..0.2),
                        rng.gen_range(0.05..0.2),
                        rng.gen_range(0.01..0.03),
                    ),
                    rng.gen_range(0.2..0.9),
                    [
                        rng.gen_range(0.1..0.9),
                        rng.gen_range(0.1..0.9),
                        rng.gen_range(0.1..0.9),
                    ],
                )
                .unwrap();
                g.reflective = all_reflective || rng.gen_bool(0.5);
                g
            })
            .collect();
        GaussianCloud {
            gaussians,
            scene_scale: 1.0,
        }
    }

    fn full_supervision(
        target: FloatImage,
        w: usize,
        h: usize,
    ) -> (CrmSet, ReflectiveMasks, FloatImage) {
        let crm = CrmSet {
            pri: FloatImage::new(w, h, 1),
            i_diff: FloatImage::new(w, h, 3),
            i_chro: FloatImage::new(w, h, 3),
            i_prop: FloatImage::new(w, h, 3),
            prop_valid: BinaryImage::filled(w, h, true),
        };
        let masks = ReflectiveMasks {
            specular: BinaryImage::new(w, h),
            overexposed: BinaryImage::new(w, h),
            non_reflective: BinaryImage::filled(w, h, true),
        };
        (crm, masks, target)
    }

    #[test]
    fn matching_target_leaves_cloud_unchanged() {
        let cloud = random_cloud(1, 10, true);
        let cam = camera();
        let r = render(&cloud, &cam).unwrap();
        let (crm, masks, target) = full_supervision(r.color.clone(), 32, 32);
        let views = [ViewSupervision {
            camera: &cam,
            target: &target,
            crm: &crm,
            masks: &masks,
        }];
        let (out, trace) =
            refine_reflective_colors(&cloud, &views, &RefineConfig::default()).unwrap();
        assert_relative_eq!(trace[0], 0.0, epsilon = 1e-12);
        for (a, b) in cloud.gaussians.iter().zip(&out.gaussians) {
            assert_eq!(a.color, b.color);
            assert_eq!(a.opacity_logit(), b.opacity_logit());
        }
    }

    #[test]
    fn unflagged_cloud_is_a_noop() {
        let cloud = random_cloud(2, 5, false);
        let mut cloud = cloud;
        for g in cloud.gaussians.iter_mut() {
            g.reflective = false;
        }
        let cam = camera();
        let target = FloatImage::filled(32, 32, 3, 0.5);
        let (crm, masks, target) = full_supervision(target, 32, 32);
        let views = [ViewSupervision {
            camera: &cam,
            target: &target,
            crm: &crm,
            masks: &masks,
        }];
        let (out, trace) =
            refine_reflective_colors(&cloud, &views, &RefineConfig::default()).unwrap();
        assert!(trace.is_empty());
        assert_eq!(out.gaussians[0].color, cloud.gaussians[0].color);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let cloud = random_cloud(3, 8, true);
        let cam = camera();
        // Random target so residuals are nonzero almost everywhere.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut target = FloatImage::new(32, 32, 3);
        for v in target.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        let (crm, masks, target) = full_supervision(target, 32, 32);
        let views = [ViewSupervision {
            camera: &cam,
            target: &target,
            crm: &crm,
            masks: &masks,
        }];
        let pixels = collect_pixels(&cloud, &views, 1.0).unwrap();
        let slot: Vec<Option<usize>> = (0..cloud.len()).map(Some).collect();
        let (g_color, g_logit) = gradient(&pixels, &cloud, &slot, cloud.len());
        let h = 1e-4;
        for i in 0..cloud.len() {
            for k in 0..3 {
                let mut plus = cloud.clone();
                plus.gaussians[i].color[k] += h;
                let mut minus = cloud.clone();
                minus.gaussians[i].color[k] -= h;
                let fd = (objective(&pixels, &plus) - objective(&pixels, &minus)) / (2.0 * h);
                let denom = fd.abs().max(1e-8);
                assert!(
                    (g_color[i][k] - fd).abs() / denom < 1e-4,
                    "color grad g{i}c{k}: analytic {} vs fd {fd}",
                    g_color[i][k]
                );
            }
            let l0 = cloud.gaussians[i].opacity_logit();
            let mut plus = cloud.clone();
            plus.gaussians[i].set_opacity_logit(l0 + h);
            let mut minus = cloud.clone();
            minus.gaussians[i].set_opacity_logit(l0 - h);
            let fd = (objective(&pixels, &plus) - objective(&pixels, &minus)) / (2.0 * h);
            let denom = fd.abs().max(1e-8);
            assert!(
                (g_logit[i] - fd).abs() / denom < 1e-4,
                "opacity grad g{i}: analytic {} vs fd {fd}",
                g_logit[i]
            );
        }
    }

    #[test]
    fn descent_trace_is_monotone_and_improves() {
        let cloud = random_cloud(4, 12, true);
        let cam = camera();
        let target = FloatImage::filled(32, 32, 3, 0.15);
        let (crm, mut masks, target) = full_supervision(target, 32, 32);
        // Supervise only covered pixels; empty background cannot change.
        let r = render(&cloud, &cam).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                masks.non_reflective.set(x, y, r.alpha.get(x, y, 0) > 0.3);
            }
        }
        let views = [ViewSupervision {
            camera: &cam,
            target: &target,
            crm: &crm,
            masks: &masks,
        }];
        let cfg = RefineConfig {
            steps: 50,
            lr: 0.2,
            lambda_ref: 1.0,
        };
        let (_, trace) = refine_reflective_colors(&cloud, &views, &cfg).unwrap();
        assert!(trace.len() >= 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "trace not monotone: {w:?}");
        }
        let last = *trace.last().unwrap();
        assert!(last < 0.5 * trace[0], "loss {last} vs initial {}", trace[0]);
    }

    #[test]
    fn tagging_flags_contributing_gaussians_only() {
        let mut cloud = random_cloud(5, 6, false);
        let cam = camera();
        let target = FloatImage::filled(32, 32, 3, 0.5);
        let (crm, mut masks, target) = full_supervision(target, 32, 32);
        // One reflective pixel in the image center.
        masks.specular.set(16, 16, true);
        masks.non_reflective.set(16, 16, false);
        let views = [ViewSupervision {
            camera: &cam,
            target: &target,
            crm: &crm,
            masks: &masks,
        }];
        let n = tag_reflective(&mut cloud, &views).unwrap();
        let r = render(&cloud, &cam).unwrap();
        let expected: std::collections::HashSet<usize> =
            r.contributors[16 * 32 + 16].iter().map(|c| c.index).collect();
        let flagged: std::collections::HashSet<usize> = cloud
            .gaussians
            .iter()
            .enumerate()
            .filter(|(_, g)| g.reflective)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(flagged, expected);
        assert_eq!(n, expected.len());
    }
}
