//! Evaluation stage: Chamfer distance of the fused mesh against the analytic
//! surface and mean angular error of the rendered normals against ground
//! truth.

use fusion_metrics::mesh::TriangleMesh;
use fusion_metrics::{chamfer_distance, normal_mae, sample_mesh};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use splat_forward::{render, GaussianCloud};

use crate::artifacts::{
    load_ground_truth, load_manifest, stage_dir, stage_path, write_json, DENSIFY, EVAL,
    RECONSTRUCT,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::{count_covered, make_cams, mean_coverage, par_map};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub cd: f64,
    pub mae_deg: f64,
    /// Mean foreground fraction covered by the rendered reconstruction.
    pub coverage: f64,
    pub n_points: usize,
    pub cd_max: f64,
    pub mae_max_deg: f64,
    pub pass: bool,
}

pub fn cmd_eval(cfg: &PipelineConfig, threads: usize) -> Result<EvalReport, CliError> {
    let root = cfg.output_root();
    let manifest = load_manifest(&root)
        .map_err(|e| CliError::Usage(format!("ground truth unavailable: {e}")))?;
    if manifest.shape != "sphere" {
        return Err(CliError::Usage(format!(
            "evaluation needs an analytic sphere ground truth, dataset shape is '{}'",
            manifest.shape
        )));
    }
    let mesh_path = stage_path(&root, RECONSTRUCT).join("mesh.ply");
    if !mesh_path.exists() {
        return Err(CliError::Data(format!(
            "missing {} (run the reconstruct stage first)",
            mesh_path.display()
        )));
    }
    let mesh = TriangleMesh::load_ply(&mesh_path)?;
    let dir = stage_dir(&root, EVAL)?;

    // Chamfer distance: area-uniform mesh samples against their projections
    // onto the analytic sphere.
    let pts = sample_mesh(&mesh, cfg.fusion.sample_points, cfg.seed)?;
    let radius = cfg.scene.radius;
    let reference: Vec<Vector3<f64>> = pts
        .iter()
        .map(|p| {
            let n = p.norm();
            if n > 1e-12 {
                p * (radius / n)
            } else {
                Vector3::new(radius, 0.0, 0.0)
            }
        })
        .collect();
    let cd = chamfer_distance(&pts, &reference)?;

    // Normal MAE and coverage from the rendered augmented cloud.
    let cloud_path = stage_path(&root, DENSIFY).join("augmented.ply");
    if !cloud_path.exists() {
        return Err(CliError::Data(format!(
            "missing {} (run the densify stage first)",
            cloud_path.display()
        )));
    }
    let cloud = GaussianCloud::load(&cloud_path)?;
    let cams = make_cams(cfg)?;
    let per_view: Vec<(f64, (usize, usize))> = par_map(cams.len(), threads, |i| {
        let gt = load_ground_truth(&root, i)
            .map_err(|e| CliError::Usage(format!("ground truth unavailable: {e}")))?;
        let r = render(&cloud, &cams[i])?;
        let pred = r.normalized_normal(cfg.splat.min_alpha);
        let mae = normal_mae(&pred, &gt.normal, &gt.foreground)?;
        let cov = count_covered(&gt.foreground, |x, y| {
            r.alpha.get(x, y, 0) >= cfg.splat.min_alpha
        });
        Ok((mae, cov))
    })?;
    let mae_deg = per_view.iter().map(|(m, _)| m).sum::<f64>() / per_view.len().max(1) as f64;
    let coverage = mean_coverage(&per_view.iter().map(|(_, c)| *c).collect::<Vec<_>>());

    let report = EvalReport {
        cd,
        mae_deg,
        coverage,
        n_points: cfg.fusion.sample_points,
        cd_max: cfg.eval.cd_max,
        mae_max_deg: cfg.eval.mae_max_deg,
        pass: cd < cfg.eval.cd_max && mae_deg < cfg.eval.mae_max_deg,
    };
    write_json(&report, &dir.join("report.json"))?;
    eprintln!(
        "eval: cd {:.5} (max {}), mae {:.3} deg (max {}), coverage {:.3} -> {}",
        report.cd,
        report.cd_max,
        report.mae_deg,
        report.mae_max_deg,
        report.coverage,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(report)
}
