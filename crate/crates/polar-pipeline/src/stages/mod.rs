//! Pipeline stages. Each stage reads the artifacts of earlier stages from
//! the output root and writes its own; `pipeline` chains all of them.

pub mod correct;
pub mod densify;
pub mod eval;
pub mod pipeline;
pub mod preprocess;
pub mod reconstruct;
pub mod synth;

pub use correct::cmd_correct;
pub use densify::cmd_densify;
pub use eval::cmd_eval;
pub use pipeline::cmd_pipeline;
pub use preprocess::cmd_preprocess;
pub use reconstruct::cmd_reconstruct;
pub use synth::cmd_synth;

use nalgebra::{Point3, UnitQuaternion, Vector2, Vector3};
use photo_correct::crm::{build_crm_set, CrmSet};
use photo_correct::masks::ReflectiveMasks;
use photo_correct::localize_reflective;
use polar_core::image::BinaryImage;
use polar_core::stokes::PolarMaps;
use polar_core::{aolp_dolp, intensity_image, CameraModel, FloatImage};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::artifacts;
use crate::config::PipelineConfig;
use crate::error::CliError;
use synth_scene::ring::RingIntrinsics;

/// Ratio between the tangential and normal axis of a spawned Gaussian.
const NORMAL_AXIS_RATIO: f64 = 10.0;

/// Camera ring described by the scene section.
pub(crate) fn make_cams(cfg: &PipelineConfig) -> Result<Vec<CameraModel>, CliError> {
    Ok(synth_scene::make_camera_ring(
        cfg.scene.views,
        cfg.scene.ring_radius,
        cfg.scene.elevation,
        &Point3::origin(),
        RingIntrinsics {
            width: cfg.scene.width,
            height: cfg.scene.height,
            focal: cfg.scene.focal,
        },
    )?)
}

/// Per-view corruption seed; correct and densify must agree on it so the
/// stand-in geometry is identical across stages.
pub(crate) fn corrupt_seed(seed: u64, view: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(view as u64 + 1))
}

/// Runs `f(0..n)` across up to `threads` workers and returns the results in
/// index order. The outputs are independent of the thread count.
pub(crate) fn par_map<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(usize) -> Result<T, CliError> + Sync,
{
    let workers = threads.max(1).min(n.max(1));
    let slots: Vec<Mutex<Option<Result<T, CliError>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled every slot"))
        .collect()
}

/// Orthonormal frame whose third axis is `n` (unit), as a rotation.
pub(crate) fn frame_from_normal(n: &Vector3<f64>) -> UnitQuaternion<f64> {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = helper.cross(n).normalize();
    let e2 = n.cross(&e1);
    let rot = nalgebra::Matrix3::from_columns(&[e1, e2, *n]);
    UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(rot))
}

/// View-frame unit normals from central differences of a depth map; zero
/// where the pixel or a required neighbor has no depth.
pub fn normals_from_depth(depth: &FloatImage, cam: &CameraModel) -> FloatImage {
    let (w, h) = (depth.width(), depth.height());
    let mut out = FloatImage::new(w, h, 3);
    let point = |x: usize, y: usize| -> Option<Vector3<f64>> {
        let d = depth.get(x, y, 0);
        if d <= 0.0 {
            return None;
        }
        let ray = cam.pixel_ray(&Vector2::new(x as f64, y as f64));
        Some(ray * d)
    };
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let (Some(c), Some(l), Some(r), Some(u), Some(d)) = (
                point(x, y),
                point(x - 1, y),
                point(x + 1, y),
                point(x, y - 1),
                point(x, y + 1),
            ) else {
                continue;
            };
            let _ = c;
            let n_cam = (r - l).cross(&(d - u));
            let len = n_cam.norm();
            if len < 1e-12 {
                continue;
            }
            // Camera frame to view frame (flip y and z), oriented toward the
            // camera (positive z in the view frame).
            let mut n_view = CameraModel::FLIP * (n_cam / len);
            if n_view.z < 0.0 {
                n_view = -n_view;
            }
            for c in 0..3 {
                out.set(x, y, c, n_view[c]);
            }
        }
    }
    out
}

/// Per-view products derived from the synth and preprocess artifacts:
/// polarization maps, intensity, reflective masks, and refinement maps.
pub(crate) struct ViewProducts {
    pub camera: CameraModel,
    /// s0/2 observed color image.
    pub intensity: FloatImage,
    pub polar: PolarMaps,
    pub masks: ReflectiveMasks,
    pub crm: CrmSet,
}

/// Rebuilds the correction products of one view from disk artifacts. The
/// quantities are cheap to recompute, which keeps the cross-stage contract in
/// the float artifacts (PNGs, Stokes PFMs) rather than in lossy mask files.
pub(crate) fn load_view_products(
    cfg: &PipelineConfig,
    root: &std::path::Path,
    view: usize,
) -> Result<ViewProducts, CliError> {
    let capture = artifacts::load_capture(root, view)?;
    let stokes = artifacts::load_stokes(root, view)?;
    let polar = aolp_dolp(&stokes);
    let intensity = intensity_image(&stokes);
    let masks = localize_reflective(&polar, &intensity, &cfg.correction)?;
    let crm = build_crm_set(&capture, &stokes, &masks, &cfg.correction)?;
    Ok(ViewProducts {
        camera: capture.camera,
        intensity,
        polar,
        masks,
        crm,
    })
}

/// Observed image with reflective pixels replaced by their refinement maps:
/// the chromaticity-corrected propagation where it is valid, the diffuse
/// estimate elsewhere.
pub(crate) fn crm_substituted(p: &ViewProducts) -> FloatImage {
    let mut out = p.intensity.clone();
    let reflective = p.masks.reflective();
    let (w, h) = (out.width(), out.height());
    for y in 0..h {
        for x in 0..w {
            if !reflective.get(x, y) {
                continue;
            }
            let src = if p.crm.prop_valid.get(x, y) {
                &p.crm.i_chro
            } else {
                &p.crm.i_diff
            };
            for c in 0..3 {
                out.set(x, y, c, src.get(x, y, c).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Stand-in initial geometry for one view: Gaussians back-projected from the
/// corrupted ground-truth depth on a pixel stride, colored from the observed
/// image and oriented along the ground-truth normals. This plays the role of
/// a partially trained splat model feeding the correction and densification
/// stages.
pub(crate) fn standin_gaussians(
    products: &ViewProducts,
    gt_normal: &FloatImage,
    depth: &FloatImage,
    stride: usize,
) -> Vec<splat_forward::Gaussian> {
    let cam = &products.camera;
    let stride = stride.max(1);
    let mut out = Vec::new();
    for y in (0..depth.height()).step_by(stride) {
        for x in (0..depth.width()).step_by(stride) {
            let d = depth.get(x, y, 0);
            if d <= 0.0 {
                continue;
            }
            let np = gt_normal.pixel(x, y);
            let n_view = Vector3::new(np[0], np[1], np[2]);
            if n_view.norm() < 1e-6 {
                continue;
            }
            let Ok(mu) = cam.backproject_pixel(&Vector2::new(x as f64, y as f64), d) else {
                continue;
            };
            let n_world = cam.normal_to_world(&n_view).normalize();
            let sigma_t = stride as f64 * d * std::f64::consts::SQRT_2 / cam.fx;
            let px = products.intensity.pixel(x, y);
            let Ok(g) = splat_forward::Gaussian::new(
                mu.coords,
                frame_from_normal(&n_world),
                Vector3::new(sigma_t, sigma_t, sigma_t / NORMAL_AXIS_RATIO),
                0.5,
                [px[0], px[1], px[2]],
            ) else {
                continue;
            };
            out.push(g);
        }
    }
    out
}

/// Fraction of foreground pixels for which `covered` holds, averaged over
/// views; the coverage metric reported by densification and evaluation.
pub(crate) fn mean_coverage(per_view: &[(usize, usize)]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0;
    for &(covered, total) in per_view {
        if total == 0 {
            continue;
        }
        acc += covered as f64 / total as f64;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Foreground pixels of a mask that also satisfy a per-pixel predicate.
pub(crate) fn count_covered(
    foreground: &BinaryImage,
    mut covered: impl FnMut(usize, usize) -> bool,
) -> (usize, usize) {
    let mut hit = 0;
    let mut total = 0;
    for y in 0..foreground.height() {
        for x in 0..foreground.width() {
            if !foreground.get(x, y) {
                continue;
            }
            total += 1;
            if covered(x, y) {
                hit += 1;
            }
        }
    }
    (hit, total)
}
