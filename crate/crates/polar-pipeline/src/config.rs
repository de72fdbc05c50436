//! Pipeline configuration: one TOML file with per-stage sections, CLI
//! overrides, and defaults matching the toolkit's reference settings.

use photo_correct::CorrectionConfig;
use polar_patchmatch::PmConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use synth_scene::{DolpModel, SceneSpec, Shape, SpecularSpec};

use crate::error::CliError;

/// Environment variable holding the default output root when the config and
/// command line leave it unset.
pub const OUTPUT_ENV: &str = "POLARSPLAT_OUTPUT";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    /// "sphere" or "plane".
    pub shape: String,
    pub radius: f64,
    pub extent: f64,
    pub views: usize,
    pub ring_radius: f64,
    pub elevation: f64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub albedo: [f64; 3],
    pub texture_amp: f64,
    pub texture_scale: f64,
    pub specular_strength: f64,
    pub shininess: f64,
    pub light_dir: [f64; 3],
    pub ambient: f64,
    pub diffuse_max: f64,
    pub specular_max: f64,
    /// Relative depth noise of the stand-in initial geometry.
    pub depth_noise_rel: f64,
    /// Hole fraction of the stand-in initial geometry.
    pub hole_fraction: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            shape: "sphere".into(),
            radius: 1.0,
            extent: 2.0,
            views: 20,
            ring_radius: 3.0,
            elevation: 0.3,
            width: 128,
            height: 128,
            focal: 120.0,
            albedo: [0.5; 3],
            texture_amp: 0.5,
            texture_scale: 12.0,
            specular_strength: 0.0,
            shininess: 10.0,
            light_dir: [0.0, 0.0, 1.0],
            ambient: 0.15,
            diffuse_max: 0.4,
            specular_max: 0.5,
            depth_noise_rel: 0.05,
            hole_fraction: 0.3,
        }
    }
}

impl SceneSection {
    pub fn to_spec(&self, seed: u64) -> Result<SceneSpec, CliError> {
        let shape = match self.shape.as_str() {
            "sphere" => Shape::Sphere {
                radius: self.radius,
            },
            "plane" => Shape::Plane {
                extent: self.extent,
            },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown scene shape '{other}' (expected 'sphere' or 'plane')"
                )))
            }
        };
        Ok(SceneSpec {
            shape,
            albedo: self.albedo,
            texture_amp: self.texture_amp,
            texture_scale: self.texture_scale,
            specular: SpecularSpec {
                strength: self.specular_strength,
                shininess: self.shininess,
            },
            light_dir: self.light_dir,
            ambient: self.ambient,
            dolp: DolpModel {
                diffuse_max: self.diffuse_max,
                specular_max: self.specular_max,
            },
            rng_seed: seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifySection {
    /// Source views per reference during matching (ring neighbors).
    pub sources_per_view: usize,
    /// Pixel stride when spawning Gaussians from surviving hypotheses.
    pub spawn_stride: usize,
    /// Pixel stride of the stand-in input cloud.
    pub input_stride: usize,
}

impl Default for DensifySection {
    fn default() -> Self {
        Self {
            sources_per_view: 2,
            spawn_stride: 1,
            input_stride: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplatSection {
    pub refine_steps: usize,
    pub refine_lr: f64,
    pub lambda_ref: f64,
    /// Accumulated-alpha floor for using a rendered pixel in evaluation.
    pub min_alpha: f64,
}

impl Default for SplatSection {
    fn default() -> Self {
        Self {
            refine_steps: 200,
            refine_lr: 0.1,
            lambda_ref: 1.0,
            min_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub voxel_size: f64,
    pub truncation: f64,
    pub max_depth: f64,
    /// Padding around the scene bounds when sizing the voxel grid.
    pub margin: f64,
    /// Surface samples per mesh for the Chamfer distance.
    pub sample_points: usize,
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            voxel_size: 0.008,
            truncation: 0.04,
            max_depth: 10.0,
            margin: 0.2,
            sample_points: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub cd_max: f64,
    pub mae_max_deg: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            cd_max: 0.024,
            mae_max_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Scalars first so the struct serializes cleanly to TOML.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub scene: SceneSection,
    pub correction: CorrectionConfig,
    pub patchmatch: PmConfig,
    pub densify: DensifySection,
    pub splat: SplatSection,
    pub fusion: FusionSection,
    pub eval: EvalSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            scene: SceneSection::default(),
            correction: CorrectionConfig::default(),
            // Extra propagation sweeps over the matcher's baseline: the full
            // pipeline feeds its refined depths straight into meshing, so it
            // is worth the additional annealing rounds.
            patchmatch: PmConfig {
                sweeps: 5,
                ..PmConfig::default()
            },
            densify: DensifySection::default(),
            splat: SplatSection::default(),
            fusion: FusionSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl PipelineConfig {
    /// Output root: config value, else the `POLARSPLAT_OUTPUT` environment
    /// variable, else `./polarsplat_out`.
    pub fn output_root(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        if let Ok(v) = std::env::var(OUTPUT_ENV) {
            if !v.is_empty() {
                return PathBuf::from(v);
            }
        }
        PathBuf::from("polarsplat_out")
    }
}

/// Applies one `section.key=value` override onto a TOML table, creating
/// intermediate tables as needed. Values parse as TOML scalars and fall back
/// to strings.
fn apply_set(root: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got '{spec}'")))?;
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("bad --set key path '{path}'")));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        table = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Usage(format!("'{k}' in '{path}' is not a table")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Loads the config file (all defaults when absent), applies `--set`
/// overrides and the optional seed override.
pub fn load_config(
    path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
) -> Result<PipelineConfig, CliError> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", p.display()))
            })?;
            text.parse()
                .map_err(|e| CliError::Usage(format!("config parse error: {e}")))?
        }
        None => toml::Table::new(),
    };
    for s in sets {
        apply_set(&mut table, s)?;
    }
    let mut cfg: PipelineConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Usage(format!("config error: {e}")))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}
