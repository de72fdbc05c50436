//! Stage-level contract tests for the pipeline CLI, run on a reduced scene
//! (fewer views, smaller images, focal scaled with the image width so the
//! camera field of view still covers the object).

use std::path::Path;

use polar_pipeline::artifacts::{load_stokes, stage_path, view_file, ANGLE_SUFFIXES};
use polar_pipeline::config::PipelineConfig;
use polar_pipeline::stages::{
    cmd_correct, cmd_densify, cmd_eval, cmd_preprocess, cmd_reconstruct, cmd_synth,
};
use splat_forward::GaussianCloud;

fn small_cfg(dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.output_dir = Some(dir.to_path_buf());
    cfg.seed = 11;
    // Eight ring views keep adjacent baselines at 45 degrees; with fewer
    // views the neighbors barely overlap and matching cannot succeed.
    cfg.scene.views = 8;
    cfg.scene.width = 48;
    cfg.scene.height = 48;
    cfg.scene.focal = 45.0;
    cfg.patchmatch.sweeps = 2;
    cfg.splat.refine_steps = 10;
    cfg.fusion.voxel_size = 0.03;
    cfg.fusion.truncation = 0.12;
    cfg.fusion.sample_points = 2000;
    cfg
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn synth_writes_expected_files_and_is_deterministic() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let cfg1 = small_cfg(t1.path());
    let cfg2 = small_cfg(t2.path());
    cmd_synth(&cfg1, 1).unwrap();
    cmd_synth(&cfg2, 1).unwrap();

    // Per view: 4 angle PNGs + depth/normal/aux PFMs + camera JSON.
    let d1 = stage_path(t1.path(), "synth");
    let n_files = std::fs::read_dir(&d1).unwrap().count();
    assert_eq!(n_files, cfg1.scene.views * 8 + 1);
    for v in 0..cfg1.scene.views {
        for s in ANGLE_SUFFIXES {
            assert!(view_file(&d1, v, s).exists());
        }
        for s in ["depth.pfm", "normal.pfm", "aux.pfm", "camera.json"] {
            assert!(view_file(&d1, v, s).exists());
        }
    }

    // Same config and seed must reproduce every artifact byte for byte.
    let b1 = dir_bytes(&d1);
    let b2 = dir_bytes(&stage_path(t2.path(), "synth"));
    assert_eq!(b1.len(), b2.len());
    for ((n1, c1), (n2, c2)) in b1.iter().zip(&b2) {
        assert_eq!(n1, n2);
        assert_eq!(c1, c2, "artifact {n1} differs between identical runs");
    }
}

#[test]
fn unknown_shape_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(t.path());
    cfg.scene.shape = "torus".into();
    let err = cmd_synth(&cfg, 1).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn preprocess_outputs_are_physical() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_cfg(t.path());
    cmd_synth(&cfg, 1).unwrap();
    cmd_preprocess(&cfg, 1).unwrap();

    for v in 0..cfg.scene.views {
        let st = load_stokes(t.path(), v).unwrap();
        let dir = stage_path(t.path(), "preprocess");
        let dolp = polar_core::pfm::read_pfm(&view_file(&dir, v, "dolp.pfm")).unwrap();
        for i in 0..st.s0.data().len() {
            let (s0, s1, s2) = (st.s0.data()[i], st.s1.data()[i], st.s2.data()[i]);
            assert!(
                s1 * s1 + s2 * s2 <= s0 * s0 * (1.0 + 1e-9) + 1e-12,
                "unphysical Stokes vector ({s0}, {s1}, {s2})"
            );
        }
        for &d in dolp.data() {
            assert!((0.0..=1.0).contains(&d), "DoLP {d} out of range");
        }
        // Stokes components must be reproducible from the stored captures
        // (the PFM files quantize to f32, hence the tolerance).
        let cap = polar_pipeline::artifacts::load_capture(t.path(), v).unwrap();
        let again = polar_core::stokes_from_angles(&cap).unwrap();
        for (a, b) in st.s0.data().iter().zip(again.s0.data()) {
            assert!((a - b).abs() < 1e-6, "s0 mismatch: {a} vs {b}");
        }
    }
}

#[test]
fn correct_warns_and_noops_without_reflective_pixels() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_cfg(t.path()); // specular_strength = 0
    cmd_synth(&cfg, 1).unwrap();
    cmd_preprocess(&cfg, 1).unwrap();
    let sum = cmd_correct(&cfg, 1).unwrap();
    assert_eq!(sum.reflective_pixels, 0);
    assert!(sum.cloud_points > 0);
    assert!(stage_path(t.path(), "correct").join("cloud.ply").exists());
    assert!(stage_path(t.path(), "correct").join("loss_trace.csv").exists());
}

#[test]
fn correct_loss_trace_is_non_increasing_on_reflective_scene() {
    let t = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(t.path());
    cfg.scene.specular_strength = 0.9;
    cfg.scene.specular_max = 0.9;
    cmd_synth(&cfg, 1).unwrap();
    cmd_preprocess(&cfg, 1).unwrap();
    let sum = cmd_correct(&cfg, 1).unwrap();
    assert!(sum.reflective_pixels > 0, "scene produced no highlights");

    let csv = std::fs::read_to_string(stage_path(t.path(), "correct").join("loss_trace.csv"))
        .unwrap();
    let losses: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(losses.len() >= 2);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "loss increased: {w:?}");
    }
}

#[test]
fn densify_writes_artifacts_and_never_reduces_coverage() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_cfg(t.path());
    cmd_synth(&cfg, 1).unwrap();
    cmd_preprocess(&cfg, 1).unwrap();
    cmd_correct(&cfg, 1).unwrap();
    let sum = cmd_densify(&cfg, 1).unwrap();

    let dir = stage_path(t.path(), "densify");
    for v in 0..cfg.scene.views {
        assert!(view_file(&dir, v, "dopt.pfm").exists());
        assert!(view_file(&dir, v, "nopt.pfm").exists());
        assert!(view_file(&dir, v, "valid.png").exists());
    }
    assert!(dir.join("augmented.ply").exists());
    assert!(sum.spawned_points > 0, "no Gaussians spawned");
    assert!(
        sum.coverage_after >= sum.coverage_before,
        "coverage dropped: {} -> {}",
        sum.coverage_before,
        sum.coverage_after
    );
    // The report must echo the scoring weights so ablation runs are
    // distinguishable from their artifacts alone.
    assert_eq!(sum.lambda1, cfg.patchmatch.lambda1);
    assert_eq!(sum.lambda2, cfg.patchmatch.lambda2);

    let mut ablation = cfg.clone();
    ablation.patchmatch.lambda1 = 0.0;
    ablation.patchmatch.lambda2 = 0.0;
    let sum0 = cmd_densify(&ablation, 1).unwrap();
    assert_eq!(sum0.lambda1, 0.0);
    assert_eq!(sum0.lambda2, 0.0);
}

#[test]
fn reconstruct_echoes_parameters_and_rejects_empty_clouds() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_cfg(t.path());
    cmd_synth(&cfg, 1).unwrap();
    cmd_preprocess(&cfg, 1).unwrap();
    cmd_correct(&cfg, 1).unwrap();
    cmd_densify(&cfg, 1).unwrap();
    let sum = cmd_reconstruct(&cfg, 1).unwrap();
    assert_eq!(sum.voxel_size, cfg.fusion.voxel_size);
    assert_eq!(sum.truncation, cfg.fusion.truncation);
    assert_eq!(sum.max_depth, cfg.fusion.max_depth);
    assert!(sum.vertices > 0 && sum.triangles > 0);
    assert!(stage_path(t.path(), "reconstruct").join("mesh.ply").exists());

    // An empty cloud is an explicit data error, not a silent empty mesh.
    let empty = GaussianCloud {
        gaussians: vec![],
        scene_scale: 1.0,
    };
    empty
        .save(&stage_path(t.path(), "densify").join("augmented.ply"))
        .unwrap();
    let err = cmd_reconstruct(&cfg, 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn eval_without_ground_truth_is_a_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let cfg = small_cfg(t.path());
    let err = cmd_eval(&cfg, 1).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
