//! Analytic ray-cast rendering of a polarized capture with ground truth.
//!
//! Shading is Lambert plus a Phong lobe. DoLP follows a monotone zenith
//! surrogate for diffuse pixels (diffuse_max * sin^2 theta) and a fixed high
//! value inside specular highlights; AoLP equals the surface azimuth for
//! diffuse pixels and azimuth + pi/2 for specular ones (the pi/2-ambiguity).
//! Overexposure is modeled as intensity clipping with DoLP below 0.1.

use nalgebra::{Vector2, Vector3};
use polar_core::image::BinaryImage;
use polar_core::stokes::malus_intensity;
use polar_core::{CameraModel, FloatImage, PolarizedCapture};
use std::f64::consts::PI;

use crate::noise::value_noise3;
use crate::shape;
use crate::spec::SceneSpec;

#[derive(Debug, Clone)]
pub struct RenderedView {
    pub capture: PolarizedCapture,
    /// Camera-frame depth; 0 marks background.
    pub gt_depth: FloatImage,
    /// Unit normals in the camera's view frame (y-up, z-toward-camera).
    pub gt_normal: FloatImage,
    /// Surface-normal azimuth in [0, 2*pi).
    pub gt_azimuth: FloatImage,
    /// Diffuse-only shading (no Phong lobe), clamped to [0, 1].
    pub gt_diffuse: FloatImage,
    pub specular_mask: BinaryImage,
    pub overexposed_mask: BinaryImage,
    /// True where the specular component dominates the reflectance.
    pub specular_type: BinaryImage,
    pub foreground: BinaryImage,
}

const ANALYZER_ANGLES: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
const DETECTOR_INTENSITY: f64 = 160.0 / 255.0;
const OVEREXPOSED_DOLP: f64 = 0.05;

pub fn render_view(scene: &SceneSpec, cam: &CameraModel) -> Result<RenderedView, crate::SynthError> {
    scene.validate()?;
    let (w, h) = (cam.width, cam.height);
    let origin = cam.position();
    let rot_t = cam.rotation().transpose();
    let light = Vector3::new(scene.light_dir[0], scene.light_dir[1], scene.light_dir[2]).normalize();

    let mut angle_imgs = [
        FloatImage::new(w, h, 3),
        FloatImage::new(w, h, 3),
        FloatImage::new(w, h, 3),
        FloatImage::new(w, h, 3),
    ];
    let mut gt_depth = FloatImage::new(w, h, 1);
    let mut gt_normal = FloatImage::new(w, h, 3);
    let mut gt_azimuth = FloatImage::new(w, h, 1);
    let mut gt_diffuse = FloatImage::new(w, h, 3);
    let mut specular_mask = BinaryImage::new(w, h);
    let mut overexposed_mask = BinaryImage::new(w, h);
    let mut specular_type = BinaryImage::new(w, h);
    let mut foreground = BinaryImage::new(w, h);

    for y in 0..h {
        for x in 0..w {
            let px = Vector2::new(x as f64, y as f64);
            let dir = (rot_t * cam.pixel_ray(&px)).normalize();
            let Some(t) = shape::intersect(&scene.shape, &origin, &dir) else {
                continue;
            };
            let p_world = origin + dir * t;
            let depth = cam.to_camera(&p_world).z;
            if depth <= 0.0 {
                continue;
            }
            let n_world = shape::normal(&scene.shape, &p_world);
            let n_view = cam.normal_to_view(&n_world);
            let zenith = n_view.z.clamp(-1.0, 1.0).acos();
            let azimuth = n_view.y.atan2(n_view.x).rem_euclid(2.0 * PI);

            // Shading.
            let tex = if scene.texture_amp > 0.0 {
                let q = p_world * scene.texture_scale;
                1.0 - scene.texture_amp * value_noise3(&q, scene.rng_seed)
            } else {
                1.0
            };
            let ndotl = n_world.dot(&light).max(0.0);
            let lambert = scene.ambient + (1.0 - scene.ambient) * ndotl;
            let mut diffuse = [0.0f64; 3];
            for c in 0..3 {
                diffuse[c] = (scene.albedo[c] * tex * lambert).clamp(0.0, 1.0);
            }
            let view = -dir;
            let spec_term = if ndotl > 0.0 {
                let refl = 2.0 * n_world.dot(&light) * n_world - light;
                scene.specular.strength * refl.dot(&view).max(0.0).powf(scene.specular.shininess)
            } else {
                0.0
            };

            let mut color = [0.0f64; 3];
            let mut max_pre = 0.0f64;
            for c in 0..3 {
                color[c] = diffuse[c] + spec_term;
                max_pre = max_pre.max(color[c]);
            }
            let overexposed = max_pre >= 1.0;
            let diffuse_lum = diffuse.iter().sum::<f64>() / 3.0;
            let is_specular_type = spec_term > diffuse_lum;

            // Polarization state.
            let (rho, aolp) = if overexposed {
                let phi = if is_specular_type {
                    (azimuth + PI / 2.0).rem_euclid(PI)
                } else {
                    azimuth.rem_euclid(PI)
                };
                (OVEREXPOSED_DOLP, phi)
            } else if is_specular_type {
                (
                    scene.dolp.specular_max,
                    (azimuth + PI / 2.0).rem_euclid(PI),
                )
            } else {
                let st = zenith.sin();
                (scene.dolp.diffuse_max * st * st, azimuth.rem_euclid(PI))
            };

            for (a, img) in ANALYZER_ANGLES.iter().zip(angle_imgs.iter_mut()) {
                for c in 0..3 {
                    // s0 per channel is twice the observed color intensity.
                    let v = malus_intensity(2.0 * color[c].min(1.0), rho, aolp, *a);
                    img.set(x, y, c, v.clamp(0.0, 1.0));
                }
            }

            gt_depth.set(x, y, 0, depth);
            for c in 0..3 {
                gt_normal.set(x, y, c, n_view[c]);
                gt_diffuse.set(x, y, c, diffuse[c]);
            }
            gt_azimuth.set(x, y, 0, azimuth);
            foreground.set(x, y, true);
            if overexposed {
                overexposed_mask.set(x, y, true);
            } else if is_specular_type && max_pre >= DETECTOR_INTENSITY {
                specular_mask.set(x, y, true);
            }
            if is_specular_type {
                specular_type.set(x, y, true);
            }
        }
    }

    Ok(RenderedView {
        capture: PolarizedCapture {
            view_id: 0,
            images: angle_imgs,
            camera: cam.clone(),
        },
        gt_depth,
        gt_normal,
        gt_azimuth,
        gt_diffuse,
        specular_mask,
        overexposed_mask,
        specular_type,
        foreground,
    })
}
