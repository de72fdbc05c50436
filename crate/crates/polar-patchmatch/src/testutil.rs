//! Small multi-view fixtures shared by the module tests: textured planes
//! rendered analytically through the camera model.

use nalgebra::{Matrix4, Point3, Vector2, Vector3};
use polar_core::image::BinaryImage;
use polar_core::{CameraModel, FloatImage, PolarMaps};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::candidates::{PmView, ViewBundle};
use crate::PmConfig;

/// Plane depth of the fixture in the reference camera.
pub const PLANE_Z: f64 = 2.0;

fn texture(x: f64, y: f64) -> f64 {
    0.5 + 0.2 * (6.0 * x + 4.0 * y).sin() + 0.15 * (9.0 * x - 5.0 * y).cos()
}

fn camera(w: usize, h: usize, baseline_x: f64) -> CameraModel {
    let mut m = Matrix4::identity();
    m[(0, 3)] = -baseline_x;
    CameraModel::new(
        2.5 * w as f64,
        2.5 * w as f64,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
        w,
        h,
        m,
    )
    .unwrap()
}

/// Intersects the pixel ray of `cam` with the world plane n . X = d.
fn hit_plane(cam: &CameraModel, x: f64, y: f64, n: &Vector3<f64>, plane_d: f64) -> Point3<f64> {
    let origin = cam.position();
    let dir = cam.rotation().transpose() * cam.pixel_ray(&Vector2::new(x, y));
    let t = (plane_d - n.dot(&origin.coords)) / n.dot(&dir);
    Point3::from(origin.coords + dir * t)
}

fn plane_view(
    cam: CameraModel,
    n_world: &Vector3<f64>,
    plane_d: f64,
    with_polar: bool,
) -> PmView {
    let (w, h) = (cam.width, cam.height);
    let mut image = FloatImage::new(w, h, 3);
    let mut depth = FloatImage::new(w, h, 1);
    let mut normal = FloatImage::new(w, h, 3);
    let mut polar = PolarMaps {
        aolp: FloatImage::new(w, h, 1),
        dolp: FloatImage::filled(w, h, 1, if with_polar { 0.05 } else { 0.0 }),
        valid: BinaryImage::filled(w, h, with_polar),
    };
    // Unit normal toward the cameras, in this view's frame.
    let mut n_view = CameraModel::FLIP * (cam.rotation() * n_world);
    if n_view.z < 0.0 {
        n_view = -n_view;
    }
    n_view.normalize_mut();
    let aolp = n_view.y.atan2(n_view.x).rem_euclid(std::f64::consts::PI);
    for y in 0..h {
        for x in 0..w {
            let p = hit_plane(&cam, x as f64, y as f64, n_world, plane_d);
            let v = texture(p.x, p.y);
            for c in 0..3 {
                image.set(x, y, c, v);
            }
            depth.set(x, y, 0, cam.to_camera(&p).z);
            for c in 0..3 {
                normal.set(x, y, c, n_view[c]);
            }
            if with_polar {
                polar.aolp.set(x, y, 0, aolp);
            }
        }
    }
    PmView {
        camera: cam,
        crm_image: image.clone(),
        image,
        reflective: BinaryImage::new(w, h),
        polar,
        depth,
        normal,
        use_crm: BinaryImage::new(w, h),
        luma: FloatImage::new(w, h, 1),
        crm_luma: FloatImage::new(w, h, 1),
    }
}

/// Two-view fixture of a fronto-parallel textured plane at z = `PLANE_Z`.
/// The reference view's initial depth and normals are perturbed by the given
/// relative/absolute noise levels; the source view keeps the ground truth.
pub fn plane_bundle(w: usize, h: usize, depth_noise_rel: f64, normal_noise: f64) -> ViewBundle {
    let n_world = Vector3::new(0.0, 0.0, -1.0);
    let plane_d = -PLANE_Z;
    let mut reference = plane_view(camera(w, h, 0.0), &n_world, plane_d, false);
    let source = plane_view(camera(w, h, 0.3), &n_world, plane_d, false);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for y in 0..h {
        for x in 0..w {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let d = reference.depth.get(x, y, 0);
            reference.depth.set(x, y, 0, d * (1.0 + depth_noise_rel * u));
            let u1: f64 = rng.gen_range(-1.0..1.0);
            let u2: f64 = rng.gen_range(-1.0..1.0);
            let np = reference.normal.pixel(x, y);
            let n = Vector3::new(
                np[0] + normal_noise * u1,
                np[1] + normal_noise * u2,
                np[2],
            )
            .normalize();
            for c in 0..3 {
                reference.normal.set(x, y, c, n[c]);
            }
        }
    }
    ViewBundle::new(vec![reference, source], 0, &PmConfig::default()).unwrap()
}

/// Three-view fixture of a tilted plane with ground-truth polarization maps
/// (AoLP equal to the view-frame azimuth of the surface normal).
pub fn tilted_polar_bundle(w: usize, h: usize) -> ViewBundle {
    let n_world = Vector3::new(0.3, 0.2, -1.0).normalize();
    let plane_d = n_world.dot(&Vector3::new(0.0, 0.0, PLANE_Z));
    let views = vec![
        plane_view(camera(w, h, 0.0), &n_world, plane_d, true),
        plane_view(camera(w, h, 0.3), &n_world, plane_d, true),
        plane_view(camera(w, h, -0.3), &n_world, plane_d, true),
    ];
    ViewBundle::new(views, 0, &PmConfig::default()).unwrap()
}
