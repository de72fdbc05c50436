//! Synthesis stage: renders the analytic polarized scene into a dataset of
//! analyzer-angle PNGs, ground-truth PFMs, and camera files.

use polar_core::png16::write_png16;
use synth_scene::render_view;

use crate::artifacts::{
    pack_aux, save_pfm, stage_dir, view_file, write_json, Manifest, ANGLE_SUFFIXES, SYNTH,
};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::{make_cams, par_map};

/// Writes the dataset: per view 4 angle PNGs, 3 ground-truth PFMs
/// (depth, normal, aux) and a camera JSON, plus one manifest.
pub fn cmd_synth(cfg: &PipelineConfig, threads: usize) -> Result<(), CliError> {
    let root = cfg.output_root();
    let scene = cfg.scene.to_spec(cfg.seed)?;
    let cams = make_cams(cfg)?;
    let dir = stage_dir(&root, SYNTH)?;

    par_map(cams.len(), threads, |i| {
        let cam = &cams[i];
        let view = render_view(&scene, cam)?;
        for (img, suffix) in view.capture.images.iter().zip(ANGLE_SUFFIXES) {
            write_png16(img, &view_file(&dir, i, suffix))?;
        }
        save_pfm(&view.gt_depth, &view_file(&dir, i, "depth.pfm"))?;
        save_pfm(&view.gt_normal, &view_file(&dir, i, "normal.pfm"))?;
        let aux = pack_aux(&view.gt_azimuth, &view.foreground, &view.specular_mask);
        save_pfm(&aux, &view_file(&dir, i, "aux.pfm"))?;
        cam.save(&view_file(&dir, i, "camera.json"))?;
        Ok(())
    })?;

    let manifest = Manifest {
        views: cams.len(),
        width: cfg.scene.width,
        height: cfg.scene.height,
        shape: cfg.scene.shape.clone(),
        seed: cfg.seed,
    };
    write_json(&manifest, &dir.join("manifest.json"))?;
    eprintln!("synth: wrote {} views to {}", cams.len(), dir.display());
    Ok(())
}
