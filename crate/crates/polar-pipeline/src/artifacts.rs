//! On-disk artifact layout shared by all pipeline stages.
//!
//! Each stage writes into its own subdirectory of the output root and later
//! stages read those files back, so every subcommand can also run standalone
//! against a previously produced directory.

use polar_core::pfm::{read_pfm, write_pfm};
use polar_core::{CameraModel, FloatImage, PolarizedCapture, StokesImage};
use polar_core::image::BinaryImage;
use polar_core::png16::read_png16;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SYNTH: &str = "synth";
pub const PREPROCESS: &str = "preprocess";
pub const CORRECT: &str = "correct";
pub const DENSIFY: &str = "densify";
pub const RECONSTRUCT: &str = "reconstruct";
pub const EVAL: &str = "eval";

/// Analyzer-angle image suffixes, in the 0/45/90/135 degree order expected by
/// [`PolarizedCapture`].
pub const ANGLE_SUFFIXES: [&str; 4] = ["a000.png", "a045.png", "a090.png", "a135.png"];

/// Stage directory, created on demand.
pub fn stage_dir(root: &Path, stage: &str) -> Result<PathBuf, CliError> {
    let dir = root.join(stage);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Stage directory path without creating it.
pub fn stage_path(root: &Path, stage: &str) -> PathBuf {
    root.join(stage)
}

/// Canonical per-view file name, e.g. `view03_depth.pfm`.
pub fn view_file(dir: &Path, view: usize, suffix: &str) -> PathBuf {
    dir.join(format!("view{view:02}_{suffix}"))
}

/// Dataset manifest written by the synthesis stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub views: usize,
    pub width: usize,
    pub height: usize,
    pub shape: String,
    pub seed: u64,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Manifest of a previously synthesized dataset; a missing manifest means the
/// synth stage has not run for this output root.
pub fn load_manifest(root: &Path) -> Result<Manifest, CliError> {
    let path = stage_path(root, SYNTH).join("manifest.json");
    if !path.exists() {
        return Err(CliError::Data(format!(
            "missing {} (run the synth stage first)",
            path.display()
        )));
    }
    read_json(&path)
}

pub fn load_camera(root: &Path, view: usize) -> Result<CameraModel, CliError> {
    let path = view_file(&stage_path(root, SYNTH), view, "camera.json");
    Ok(CameraModel::load(&path)?)
}

/// Reads the four analyzer-angle PNGs and the camera of one view back into a
/// capture.
pub fn load_capture(root: &Path, view: usize) -> Result<PolarizedCapture, CliError> {
    let dir = stage_path(root, SYNTH);
    let camera = load_camera(root, view)?;
    let mut images = Vec::with_capacity(4);
    for suffix in ANGLE_SUFFIXES {
        images.push(read_png16(&view_file(&dir, view, suffix))?);
    }
    let images: [FloatImage; 4] = images.try_into().expect("four angle images");
    let capture = PolarizedCapture {
        view_id: view as u32,
        images,
        camera,
    };
    capture.validate()?;
    Ok(capture)
}

/// Stokes components written by the preprocess stage.
pub fn load_stokes(root: &Path, view: usize) -> Result<StokesImage, CliError> {
    let dir = stage_path(root, PREPROCESS);
    let s0 = read_pfm(&view_file(&dir, view, "s0.pfm"))?;
    let s1 = read_pfm(&view_file(&dir, view, "s1.pfm"))?;
    let s2 = read_pfm(&view_file(&dir, view, "s2.pfm"))?;
    Ok(StokesImage { s0, s1, s2 })
}

/// Ground truth of one synthesized view.
pub struct GroundTruth {
    pub depth: FloatImage,
    /// Unit normals in the camera's view frame.
    pub normal: FloatImage,
    pub azimuth: FloatImage,
    pub foreground: BinaryImage,
    pub specular: BinaryImage,
}

/// Packs azimuth/foreground/specular into the 3-channel auxiliary PFM.
pub fn pack_aux(
    azimuth: &FloatImage,
    foreground: &BinaryImage,
    specular: &BinaryImage,
) -> FloatImage {
    let (w, h) = (azimuth.width(), azimuth.height());
    let mut aux = FloatImage::new(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            aux.set(x, y, 0, azimuth.get(x, y, 0));
            aux.set(x, y, 1, if foreground.get(x, y) { 1.0 } else { 0.0 });
            aux.set(x, y, 2, if specular.get(x, y) { 1.0 } else { 0.0 });
        }
    }
    aux
}

pub fn load_ground_truth(root: &Path, view: usize) -> Result<GroundTruth, CliError> {
    let dir = stage_path(root, SYNTH);
    let depth = read_pfm(&view_file(&dir, view, "depth.pfm"))?;
    let normal = read_pfm(&view_file(&dir, view, "normal.pfm"))?;
    let aux = read_pfm(&view_file(&dir, view, "aux.pfm"))?;
    let (w, h) = (aux.width(), aux.height());
    let mut azimuth = FloatImage::new(w, h, 1);
    let mut foreground = BinaryImage::new(w, h);
    let mut specular = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            azimuth.set(x, y, 0, aux.get(x, y, 0));
            foreground.set(x, y, aux.get(x, y, 1) > 0.5);
            specular.set(x, y, aux.get(x, y, 2) > 0.5);
        }
    }
    Ok(GroundTruth {
        depth,
        normal,
        azimuth,
        foreground,
        specular,
    })
}

pub fn save_pfm(img: &FloatImage, path: &Path) -> Result<(), CliError> {
    write_pfm(img, path)?;
    Ok(())
}
