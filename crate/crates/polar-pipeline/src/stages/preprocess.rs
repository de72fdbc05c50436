//! Preprocess stage: Stokes decomposition and polarization maps for every
//! view of the synthesized dataset.

use polar_core::png16::{write_mask_png, write_png16};
use polar_core::{aolp_dolp, intensity_image, stokes_from_angles};

use crate::artifacts::{load_capture, load_manifest, save_pfm, stage_dir, view_file, PREPROCESS};
use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::stages::par_map;

/// Per view: Stokes component PFMs (s0/s1/s2), AoLP/DoLP PFMs, the validity
/// mask, and the s0/2 intensity PNG.
pub fn cmd_preprocess(cfg: &PipelineConfig, threads: usize) -> Result<(), CliError> {
    let root = cfg.output_root();
    let manifest = load_manifest(&root)?;
    let dir = stage_dir(&root, PREPROCESS)?;

    par_map(manifest.views, threads, |i| {
        let capture = load_capture(&root, i)?;
        let stokes = stokes_from_angles(&capture)?;
        let polar = aolp_dolp(&stokes);
        save_pfm(&stokes.s0, &view_file(&dir, i, "s0.pfm"))?;
        save_pfm(&stokes.s1, &view_file(&dir, i, "s1.pfm"))?;
        save_pfm(&stokes.s2, &view_file(&dir, i, "s2.pfm"))?;
        save_pfm(&polar.aolp, &view_file(&dir, i, "aolp.pfm"))?;
        save_pfm(&polar.dolp, &view_file(&dir, i, "dolp.pfm"))?;
        write_mask_png(&polar.valid, &view_file(&dir, i, "valid.png"))?;
        write_png16(&intensity_image(&stokes), &view_file(&dir, i, "intensity.png"))?;
        Ok(())
    })?;
    eprintln!(
        "preprocess: wrote Stokes and polarization maps for {} views to {}",
        manifest.views,
        dir.display()
    );
    Ok(())
}
