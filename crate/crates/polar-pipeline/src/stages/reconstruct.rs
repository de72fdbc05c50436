//! Reconstruction stage: renders depth from the augmented cloud for every
//! camera, fuses the depths into a TSDF volume, and extracts a triangle mesh.

use fusion_metrics::{extract_mesh, integrate_depth, TsdfVolume};
use nalgebra::Vector3;
use polar_core::FloatImage;
use serde::{Deserialize, Serialize};
use splat_forward::{render, GaussianCloud};

use crate::artifacts::{load_manifest, stage_dir, stage_path, write_json, DENSIFY, RECONSTRUCT};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::{make_cams, par_map};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructSummary {
    pub voxel_size: f64,
    pub truncation: f64,
    pub max_depth: f64,
    pub cloud_points: usize,
    pub vertices: usize,
    pub triangles: usize,
}

pub fn cmd_reconstruct(cfg: &PipelineConfig, threads: usize) -> Result<ReconstructSummary, CliError> {
    let root = cfg.output_root();
    let manifest = load_manifest(&root)?;
    let cloud_path = stage_path(&root, DENSIFY).join("augmented.ply");
    if !cloud_path.exists() {
        return Err(CliError::Data(format!(
            "missing {} (run the densify stage first)",
            cloud_path.display()
        )));
    }
    let cloud = GaussianCloud::load(&cloud_path)?;
    if cloud.is_empty() {
        return Err(CliError::Data("cloud is empty; nothing to reconstruct".into()));
    }
    let cams = make_cams(cfg)?;
    if cams.len() != manifest.views {
        return Err(CliError::Usage(format!(
            "config declares {} views but the dataset has {}",
            cams.len(),
            manifest.views
        )));
    }
    let dir = stage_dir(&root, RECONSTRUCT)?;

    // Alpha-gated rendered depth per camera.
    let depths: Vec<FloatImage> = par_map(cams.len(), threads, |i| {
        let r = render(&cloud, &cams[i])?;
        let mut depth = r.depth;
        for (d, a) in depth.data_mut().iter_mut().zip(r.alpha.data()) {
            if *a < cfg.splat.min_alpha {
                *d = 0.0;
            }
        }
        Ok(depth)
    })?;

    // Volume bounds: cloud bounding box padded by the fusion margin.
    let mut lo = Vector3::repeat(f64::MAX);
    let mut hi = Vector3::repeat(f64::MIN);
    for g in &cloud.gaussians {
        for k in 0..3 {
            lo[k] = lo[k].min(g.mu[k]);
            hi[k] = hi[k].max(g.mu[k]);
        }
    }
    let margin = Vector3::repeat(cfg.fusion.margin);
    let mut vol = TsdfVolume::for_bounds(
        lo - margin,
        hi + margin,
        cfg.fusion.voxel_size,
        cfg.fusion.truncation,
        cfg.fusion.max_depth,
    )?;
    for (depth, cam) in depths.iter().zip(&cams) {
        integrate_depth(&mut vol, depth, cam)?;
    }
    let mesh = extract_mesh(&vol);
    if mesh.is_empty() {
        return Err(CliError::Numerical(
            "TSDF fusion produced an empty mesh".into(),
        ));
    }
    mesh.save_ply(&dir.join("mesh.ply"))?;

    let summary = ReconstructSummary {
        voxel_size: cfg.fusion.voxel_size,
        truncation: cfg.fusion.truncation,
        max_depth: cfg.fusion.max_depth,
        cloud_points: cloud.len(),
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
    };
    write_json(&summary, &dir.join("reconstruct_report.json"))?;
    eprintln!(
        "reconstruct: voxel {} truncation {} range {}; mesh with {} vertices / {} triangles",
        summary.voxel_size, summary.truncation, summary.max_depth, summary.vertices,
        summary.triangles
    );
    Ok(summary)
}
