//! Fusing rendered depth maps of an analytic sphere from a camera ring must
//! recover the surface to sub-voxel accuracy.

use fusion_metrics::{chamfer_distance, extract_mesh, integrate_depth, sample_mesh, TsdfVolume};
use nalgebra::{Point3, Vector3};
use synth_scene::ring::RingIntrinsics;
use synth_scene::{make_camera_ring, render_view, DolpModel, SceneSpec, Shape, SpecularSpec};

fn sphere_scene() -> SceneSpec {
    SceneSpec {
        shape: Shape::Sphere { radius: 1.0 },
        albedo: [0.5; 3],
        texture_amp: 0.0,
        texture_scale: 4.0,
        specular: SpecularSpec {
            strength: 0.0,
            shininess: 10.0,
        },
        light_dir: [0.0, 0.0, 1.0],
        ambient: 0.15,
        dolp: DolpModel {
            diffuse_max: 0.4,
            specular_max: 0.5,
        },
        rng_seed: 1,
    }
}

#[test]
fn twenty_view_sphere_recovers_the_surface() {
    let scene = sphere_scene();
    let cams = make_camera_ring(
        20,
        3.0,
        0.3,
        &Point3::origin(),
        RingIntrinsics {
            width: 128,
            height: 128,
            focal: 120.0,
        },
    )
    .unwrap();
    let voxel = 0.02;
    let mut vol = TsdfVolume::for_bounds(
        Vector3::new(-1.2, -1.2, -1.2),
        Vector3::new(1.2, 1.2, 1.2),
        voxel,
        0.1,
        10.0,
    )
    .unwrap();
    for cam in &cams {
        let view = render_view(&scene, cam).unwrap();
        integrate_depth(&mut vol, &view.gt_depth, cam).unwrap();
    }
    let mesh = extract_mesh(&vol);
    assert!(!mesh.is_empty());
    // Zero-level set radius error below 1.5 voxels (RMS and near-worst-case).
    let errs: Vec<f64> = mesh.vertices.iter().map(|v| v.norm() - 1.0).collect();
    let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
    assert!(rms < 1.5 * voxel, "radius RMS error {rms}");

    // Chamfer distance against the analytic sphere stays below a voxel.
    let pts = sample_mesh(&mesh, 20_000, 7).unwrap();
    let reference: Vec<Vector3<f64>> = pts.iter().map(|p| p.normalize()).collect();
    let cd = chamfer_distance(&pts, &reference).unwrap();
    assert!(cd < voxel, "chamfer against analytic sphere: {cd}");
}
