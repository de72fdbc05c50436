//! Scene description, serializable as JSON.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    Plane {
        /// Half-extent of the square patch in the z = 0 plane.
        extent: f64,
    },
    /// Superellipsoid with semi-axes (a, b, c) and shape exponents (e1, e2).
    Supershape {
        a: f64,
        b: f64,
        c: f64,
        e1: f64,
        e2: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpecularSpec {
    /// Peak Phong-lobe intensity in [0, 1+].
    pub strength: f64,
    /// Phong exponent.
    pub shininess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DolpModel {
    /// DoLP of a diffuse pixel at grazing zenith (rho = diffuse_max * sin^2 theta).
    pub diffuse_max: f64,
    /// DoLP assigned inside specular highlights.
    pub specular_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneSpec {
    pub shape: Shape,
    pub albedo: [f64; 3],
    /// Multiplicative texture contrast in [0, 1); 0 means textureless.
    #[serde(default)]
    pub texture_amp: f64,
    /// Spatial frequency of the procedural texture (lattice cells per unit).
    #[serde(default = "default_texture_scale")]
    pub texture_scale: f64,
    pub specular: SpecularSpec,
    pub light_dir: [f64; 3],
    /// Ambient fraction of the Lambert term.
    #[serde(default = "default_ambient")]
    pub ambient: f64,
    pub dolp: DolpModel,
    pub rng_seed: u64,
}

fn default_texture_scale() -> f64 {
    4.0
}

fn default_ambient() -> f64 {
    0.15
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), crate::SynthError> {
        let ok = match self.shape {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Plane { extent } => extent > 0.0,
            Shape::Supershape { a, b, c, e1, e2 } => {
                a > 0.0 && b > 0.0 && c > 0.0 && e1 > 0.0 && e2 > 0.0
            }
        };
        if !ok {
            return Err(crate::SynthError::Config(
                "shape parameters must be positive".into(),
            ));
        }
        if !self.albedo.iter().all(|v| v.is_finite()) {
            return Err(crate::SynthError::Config("albedo must be finite".into()));
        }
        if self.specular.shininess <= 0.0 {
            return Err(crate::SynthError::Config("shininess must be positive".into()));
        }
        Ok(())
    }
}
