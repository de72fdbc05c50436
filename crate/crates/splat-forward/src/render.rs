//! Front-to-back alpha-blended splatting of color, depth, normal, and alpha.

use nalgebra::{Vector2, Vector3};
use polar_core::{CameraModel, FloatImage};

use crate::gaussian::GaussianCloud;
use crate::project::project_gaussian;
use crate::SplatError;

/// Per-pixel contributor, ordered front to back.
#[derive(Debug, Clone, Copy)]
pub struct Contributor {
    /// Index into the cloud.
    pub index: usize,
    /// Blending opacity o * exp(-0.5 d^T cov^-1 d), clipped to 0.99.
    pub alpha: f64,
    /// Spatial falloff alone (alpha / opacity), kept for refinement where
    /// opacity changes but geometry is frozen.
    pub falloff: f64,
    pub depth: f64,
}

#[derive(Debug, Clone)]
pub struct SplatRender {
    pub color: FloatImage,
    /// Alpha-normalized blended depth; 0 where nothing was hit.
    pub depth: FloatImage,
    /// Alpha-blended view-frame normal (not unit length).
    pub normal: FloatImage,
    /// Accumulated opacity, sum of T_i alpha_i.
    pub alpha: FloatImage,
    /// Front-to-back contributor lists, one per pixel in row-major order.
    pub contributors: Vec<Vec<Contributor>>,
}

impl SplatRender {
    /// Unit-normalized normal map; zero where alpha is below `min_alpha`.
    pub fn normalized_normal(&self, min_alpha: f64) -> FloatImage {
        let (w, h) = (self.normal.width(), self.normal.height());
        let mut out = FloatImage::new(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                if self.alpha.get(x, y, 0) < min_alpha {
                    continue;
                }
                let n = Vector3::new(
                    self.normal.get(x, y, 0),
                    self.normal.get(x, y, 1),
                    self.normal.get(x, y, 2),
                );
                let len = n.norm();
                if len > 1e-12 {
                    for c in 0..3 {
                        out.set(x, y, c, n[c] / len);
                    }
                }
            }
        }
        out
    }
}

/// Skip contributors fainter than this (standard 1/255 cutoff).
pub const ALPHA_CUTOFF: f64 = 1.0 / 255.0;
/// Alpha clip preventing fully opaque splats.
pub const ALPHA_CLIP: f64 = 0.99;

/// Splats the cloud into color/depth/normal/alpha images. Gaussians are
/// sorted by a canonical key (depth, then center coordinates) so the output
/// is invariant to the storage order of the cloud.
pub fn render(cloud: &GaussianCloud, cam: &CameraModel) -> Result<SplatRender, SplatError> {
    if cloud.is_empty() {
        return Err(SplatError::EmptyCloud);
    }
    let (w, h) = (cam.width, cam.height);

    struct Prepared {
        index: usize,
        mean: Vector2<f64>,
        inv_cov: nalgebra::Matrix2<f64>,
        depth: f64,
        opacity: f64,
        normal_view: Vector3<f64>,
        radius: f64,
    }

    let mut prepared: Vec<Prepared> = Vec::new();
    for (index, g) in cloud.gaussians.iter().enumerate() {
        let Some(p) = project_gaussian(g, cam) else {
            continue;
        };
        let det = p.cov.determinant();
        if det <= 0.0 {
            continue;
        }
        let inv_cov = p.cov.try_inverse().expect("positive-definite covariance");
        let eig_max = p.cov.symmetric_eigen().eigenvalues.max();
        let (axis_world, _) = g.min_axis();
        let normal_view = cam.normal_to_view(&axis_world);
        prepared.push(Prepared {
            index,
            mean: p.mean,
            inv_cov,
            depth: p.depth,
            opacity: g.opacity(),
            normal_view,
            radius: 3.0 * eig_max.sqrt(),
        });
    }
    // Canonical front-to-back order; ties broken on the center coordinates so
    // equal-depth Gaussians still blend deterministically.
    prepared.sort_by(|a, b| {
        let ka = cloud.gaussians[a.index].mu;
        let kb = cloud.gaussians[b.index].mu;
        a.depth
            .total_cmp(&b.depth)
            .then(ka.x.total_cmp(&kb.x))
            .then(ka.y.total_cmp(&kb.y))
            .then(ka.z.total_cmp(&kb.z))
    });

    let mut contributors: Vec<Vec<Contributor>> = vec![Vec::new(); w * h];
    for p in &prepared {
        let x0 = ((p.mean.x - p.radius).floor().max(0.0)) as usize;
        let x1 = ((p.mean.x + p.radius).ceil().min(w as f64 - 1.0)) as usize;
        let y0 = ((p.mean.y - p.radius).floor().max(0.0)) as usize;
        let y1 = ((p.mean.y + p.radius).ceil().min(h as f64 - 1.0)) as usize;
        if p.mean.x + p.radius < 0.0 || p.mean.y + p.radius < 0.0 {
            continue;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = Vector2::new(x as f64 - p.mean.x, y as f64 - p.mean.y);
                let q = (d.transpose() * p.inv_cov * d)[(0, 0)];
                if q < 0.0 {
                    continue;
                }
                let falloff = (-0.5 * q).exp();
                let alpha = (p.opacity * falloff).min(ALPHA_CLIP);
                if alpha < ALPHA_CUTOFF {
                    continue;
                }
                contributors[y * w + x].push(Contributor {
                    index: p.index,
                    alpha,
                    falloff,
                    depth: p.depth,
                });
            }
        }
    }

    let mut color = FloatImage::new(w, h, 3);
    let mut depth = FloatImage::new(w, h, 1);
    let mut normal = FloatImage::new(w, h, 3);
    let mut alpha_img = FloatImage::new(w, h, 1);
    // Quick lookup of per-Gaussian blend attributes in prepared order.
    let mut normal_of = vec![Vector3::zeros(); cloud.len()];
    for p in &prepared {
        normal_of[p.index] = p.normal_view;
    }
    for y in 0..h {
        for x in 0..w {
            let list = &contributors[y * w + x];
            let mut t = 1.0;
            let mut acc_c = [0.0; 3];
            let mut acc_d = 0.0;
            let mut acc_n = Vector3::zeros();
            let mut acc_a = 0.0;
            for ct in list {
                let wgt = t * ct.alpha;
                let g = &cloud.gaussians[ct.index];
                for c in 0..3 {
                    acc_c[c] += wgt * g.color[c];
                }
                acc_d += wgt * ct.depth;
                acc_n += wgt * normal_of[ct.index];
                acc_a += wgt;
                t *= 1.0 - ct.alpha;
            }
            for c in 0..3 {
                color.set(x, y, c, acc_c[c]);
                normal.set(x, y, c, acc_n[c]);
            }
            if acc_a > 0.0 {
                depth.set(x, y, 0, acc_d / acc_a);
            }
            alpha_img.set(x, y, 0, acc_a);
        }
    }

    Ok(SplatRender {
        color,
        depth,
        normal,
        alpha: alpha_img,
        contributors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::Gaussian;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, UnitQuaternion, Vector3};
    use rand::{Rng, SeedableRng};

    fn camera() -> CameraModel {
        CameraModel::new(80.0, 80.0, 32.0, 32.0, 64, 64, Matrix4::identity()).unwrap()
    }

    fn big_gaussian(z: f64, opacity: f64, color: [f64; 3]) -> Gaussian {
        Gaussian::new(
            Vector3::new(0.0, 0.0, z),
            UnitQuaternion::identity(),
            Vector3::new(0.5, 0.5, 0.01),
            opacity,
            color,
        )
        .unwrap()
    }

    #[test]
    fn single_opaque_gaussian_reads_back_depth_and_alpha() {
        let cloud = GaussianCloud {
            gaussians: vec![big_gaussian(2.0, 0.9899999, [1.0, 0.0, 0.0])],
            scene_scale: 1.0,
        };
        let r = render(&cloud, &camera()).unwrap();
        assert_relative_eq!(r.depth.get(32, 32, 0), 2.0, epsilon = 1e-3);
        assert_relative_eq!(r.alpha.get(32, 32, 0), 0.99, epsilon = 1e-3);
        assert!(r.color.get(32, 32, 0) > 0.97);
    }

    #[test]
    fn empty_pixel_is_background() {
        let cloud = GaussianCloud {
            gaussians: vec![Gaussian::new(
                Vector3::new(0.0, 0.0, 2.0),
                UnitQuaternion::identity(),
                Vector3::new(0.01, 0.01, 0.01),
                0.9,
                [1.0; 3],
            )
            .unwrap()],
            scene_scale: 1.0,
        };
        let r = render(&cloud, &camera()).unwrap();
        assert_eq!(r.alpha.get(0, 0, 0), 0.0);
        assert_eq!(r.depth.get(0, 0, 0), 0.0);
        assert_eq!(r.color.get(0, 0, 0), 0.0);
    }

    #[test]
    fn two_gaussian_blend_matches_hand_evaluation() {
        // Both huge and centered: at the principal pixel the spatial falloff
        // is ~1, so alpha equals opacity there.
        let cloud = GaussianCloud {
            gaussians: vec![
                big_gaussian(2.0, 0.5, [1.0, 0.0, 0.0]),
                big_gaussian(3.0, 0.8, [0.0, 1.0, 0.0]),
            ],
            scene_scale: 1.0,
        };
        let r = render(&cloud, &camera()).unwrap();
        let red = r.color.get(32, 32, 0);
        let green = r.color.get(32, 32, 1);
        assert_relative_eq!(red, 0.5, epsilon = 1e-3);
        assert_relative_eq!(green, 0.5 * 0.8, epsilon = 1e-3);
    }

    #[test]
    fn empty_cloud_is_error() {
        let cloud = GaussianCloud {
            gaussians: vec![],
            scene_scale: 1.0,
        };
        assert!(matches!(render(&cloud, &camera()), Err(SplatError::EmptyCloud)));
    }

    fn random_cloud(seed: u64, n: usize) -> GaussianCloud {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let gaussians = (0..n)
            .map(|_| {
                let mut g = Gaussian::new(
                    Vector3::new(
                        rng.gen_range(-0.4..0.4),
                        rng.gen_range(-0.4..0.4),
                        rng.gen_range(1.5..3.5),
                    ),
                    UnitQuaternion::from_euler_angles(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ),
                    Vector3::new(
                        rng.gen_range(0.02..0.15),
                        rng.gen_range(0.02..0.15),
                        rng.gen_range(0.005..0.03),
                    ),
                    rng.gen_range(0.1..0.95),
                    [rng.gen(), rng.gen(), rng.gen()],
                )
                .unwrap();
                g.reflective = rng.gen_bool(0.3);
                g
            })
            .collect();
        GaussianCloud {
            gaussians,
            scene_scale: 1.0,
        }
    }

    #[test]
    fn transmittance_identity_holds_per_pixel() {
        let cloud = random_cloud(5, 40);
        let r = render(&cloud, &camera()).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                let mut prod = 1.0;
                for c in &r.contributors[y * 64 + x] {
                    prod *= 1.0 - c.alpha;
                }
                let want = 1.0 - prod;
                let got = r.alpha.get(x, y, 0);
                assert!((got - want).abs() < 1e-9, "pixel ({x},{y}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn render_invariant_to_storage_order() {
        let cloud = random_cloud(9, 30);
        let mut shuffled = cloud.clone();
        shuffled.gaussians.reverse();
        shuffled.gaussians.swap(3, 17);
        let a = render(&cloud, &camera()).unwrap();
        let b = render(&shuffled, &camera()).unwrap();
        assert_eq!(a.color.data(), b.color.data());
        assert_eq!(a.depth.data(), b.depth.data());
        assert_eq!(a.normal.data(), b.normal.data());
        assert_eq!(a.alpha.data(), b.alpha.data());
    }

    #[test]
    fn normals_unit_length_where_opaque() {
        let cloud = random_cloud(13, 40);
        let r = render(&cloud, &camera()).unwrap();
        let n = r.normalized_normal(0.5);
        let mut checked = 0;
        for y in 0..64 {
            for x in 0..64 {
                if r.alpha.get(x, y, 0) > 0.5 {
                    let len = (0..3).map(|c| n.get(x, y, c).powi(2)).sum::<f64>().sqrt();
                    assert_relative_eq!(len, 1.0, epsilon = 1e-9);
                    checked += 1;
                }
            }
        }
        assert!(checked > 50, "only {checked} opaque pixels");
    }

    #[test]
    fn rendered_normals_face_the_camera() {
        let cloud = random_cloud(21, 40);
        let r = render(&cloud, &camera()).unwrap();
        let n = r.normalized_normal(0.5);
        for y in 0..64 {
            for x in 0..64 {
                if r.alpha.get(x, y, 0) > 0.5 {
                    assert!(n.get(x, y, 2) >= 0.0, "normal z flipped at ({x},{y})");
                }
            }
        }
    }
}
