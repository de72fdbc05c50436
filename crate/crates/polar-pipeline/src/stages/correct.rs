//! Correction stage: reflective-region localization, refinement-map
//! construction, and color/opacity refinement of the stand-in Gaussian cloud.

use polar_core::png16::write_mask_png;
use serde::{Deserialize, Serialize};
use splat_forward::refine::tag_reflective;
use splat_forward::{refine_reflective_colors, GaussianCloud, RefineConfig, ViewSupervision};
use synth_scene::corrupt_depth;

use crate::artifacts::{
    load_ground_truth, load_manifest, save_pfm, stage_dir, view_file, write_json, CORRECT,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::{corrupt_seed, load_view_products, par_map, standin_gaussians, ViewProducts};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectSummary {
    pub views: usize,
    /// Total reflective (specular + overexposed) pixels across views.
    pub reflective_pixels: usize,
    pub cloud_points: usize,
    pub refine_steps: usize,
    pub final_loss: Option<f64>,
}

/// Runs localize -> PRI -> I_diff -> propagate -> I_chro per view, writes the
/// masks and refinement maps, builds the stand-in cloud, and refines the
/// colors and opacities of its reflective Gaussians. A scene without
/// reflective pixels degrades to a warning no-op on the refinement step.
pub fn cmd_correct(cfg: &PipelineConfig, threads: usize) -> Result<CorrectSummary, CliError> {
    let root = cfg.output_root();
    let manifest = load_manifest(&root)?;
    let dir = stage_dir(&root, CORRECT)?;

    let products: Vec<ViewProducts> = par_map(manifest.views, threads, |i| {
        let p = load_view_products(cfg, &root, i)?;
        write_mask_png(&p.masks.specular, &view_file(&dir, i, "specular.png"))?;
        write_mask_png(&p.masks.overexposed, &view_file(&dir, i, "overexposed.png"))?;
        write_mask_png(&p.crm.prop_valid, &view_file(&dir, i, "prop_valid.png"))?;
        save_pfm(&p.crm.pri, &view_file(&dir, i, "pri.pfm"))?;
        save_pfm(&p.crm.i_diff, &view_file(&dir, i, "idiff.pfm"))?;
        save_pfm(&p.crm.i_prop, &view_file(&dir, i, "iprop.pfm"))?;
        save_pfm(&p.crm.i_chro, &view_file(&dir, i, "ichro.pfm"))?;
        Ok(p)
    })?;

    // Stand-in initial geometry from the corrupted ground-truth depth.
    let gaussians: Vec<_> = par_map(manifest.views, threads, |i| {
        let gt = load_ground_truth(&root, i)?;
        let depth = corrupt_depth(
            &gt.depth,
            cfg.scene.depth_noise_rel,
            cfg.scene.hole_fraction,
            corrupt_seed(cfg.seed, i),
        );
        Ok(standin_gaussians(
            &products[i],
            &gt.normal,
            &depth,
            cfg.densify.input_stride,
        ))
    })?
    .into_iter()
    .flatten()
    .collect();
    if gaussians.is_empty() {
        return Err(CliError::Data("stand-in cloud is empty".into()));
    }
    let mut cloud = GaussianCloud {
        gaussians,
        scene_scale: cfg.scene.ring_radius,
    };

    let views: Vec<ViewSupervision<'_>> = products
        .iter()
        .map(|p| ViewSupervision {
            camera: &p.camera,
            target: &p.intensity,
            crm: &p.crm,
            masks: &p.masks,
        })
        .collect();
    let reflective_pixels: usize = products.iter().map(|p| p.masks.reflective().count()).sum();
    if reflective_pixels == 0 {
        eprintln!("warning: no reflective pixels detected; color refinement is a no-op");
    }
    tag_reflective(&mut cloud, &views)?;
    let (refined, trace) = refine_reflective_colors(
        &cloud,
        &views,
        &RefineConfig {
            steps: cfg.splat.refine_steps,
            lr: cfg.splat.refine_lr,
            lambda_ref: cfg.splat.lambda_ref,
        },
    )?;

    let mut csv = String::from("step,loss\n");
    for (step, loss) in trace.iter().enumerate() {
        csv.push_str(&format!("{step},{loss}\n"));
    }
    std::fs::write(dir.join("loss_trace.csv"), csv)?;
    refined.save(&dir.join("cloud.ply"))?;

    let summary = CorrectSummary {
        views: manifest.views,
        reflective_pixels,
        cloud_points: refined.len(),
        refine_steps: trace.len().saturating_sub(1),
        final_loss: trace.last().copied(),
    };
    write_json(&summary, &dir.join("correct_report.json"))?;
    eprintln!(
        "correct: {} reflective pixels, cloud of {} points written to {}",
        summary.reflective_pixels,
        summary.cloud_points,
        dir.display()
    );
    Ok(summary)
}
