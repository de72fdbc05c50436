//! Gaussian primitives and cloud persistence.
//!
//! Scales are stored as logs and opacity as a logit so that gradient steps
//! stay in the valid domain; accessors expose the constrained values.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::SplatError;

#[derive(Debug, Clone)]
pub struct Gaussian {
    /// Center in world coordinates.
    pub mu: Vector3<f64>,
    /// Orientation; columns of the rotation are the principal axes.
    pub quat: UnitQuaternion<f64>,
    log_scale: Vector3<f64>,
    opacity_logit: f64,
    /// DC color in [0, 1] per channel.
    pub color: [f64; 3],
    /// Set when the projected footprint overlaps a reflective mask.
    pub reflective: bool,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Gaussian {
    pub fn new(
        mu: Vector3<f64>,
        quat: UnitQuaternion<f64>,
        scale: Vector3<f64>,
        opacity: f64,
        color: [f64; 3],
    ) -> Result<Self, SplatError> {
        if !(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0) {
            return Err(SplatError::Parameter(format!("scale must be positive, got {scale:?}")));
        }
        if !(0.0..1.0).contains(&opacity) || opacity == 0.0 {
            return Err(SplatError::Parameter(format!(
                "opacity must lie in (0, 1), got {opacity}"
            )));
        }
        Ok(Self {
            mu,
            quat,
            log_scale: scale.map(f64::ln),
            opacity_logit: logit(opacity),
            color,
            reflective: false,
        })
    }

    pub fn scale(&self) -> Vector3<f64> {
        self.log_scale.map(f64::exp)
    }

    pub fn log_scale(&self) -> Vector3<f64> {
        self.log_scale
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn opacity_logit(&self) -> f64 {
        self.opacity_logit
    }

    pub fn set_opacity_logit(&mut self, v: f64) {
        self.opacity_logit = v;
    }

    /// World-space covariance R S^2 R^T.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.quat.to_rotation_matrix();
        let s = self.scale();
        let d = Matrix3::from_diagonal(&Vector3::new(s.x * s.x, s.y * s.y, s.z * s.z));
        r.matrix() * d * r.matrix().transpose()
    }

    /// Unit axis of the smallest scale (world frame) and that scale.
    pub fn min_axis(&self) -> (Vector3<f64>, f64) {
        let s = self.scale();
        let vals = [s.x, s.y, s.z];
        let k = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        let r = self.quat.to_rotation_matrix();
        (r.matrix().column(k).into_owned(), vals[k])
    }
}

#[derive(Debug, Clone)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian>,
    /// Characteristic extent of the scene (used for size heuristics).
    pub scene_scale: f64,
}

const PLY_PROPS: [&str; 14] = [
    "x", "y", "z", "qw", "qx", "qy", "qz", "log_scale_0", "log_scale_1", "log_scale_2",
    "opacity_logit", "red", "green", "blue",
];

impl GaussianCloud {
    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    /// Binary little-endian PLY with one vertex per Gaussian; all parameters
    /// are stored as doubles so a save/load round trip is bit-exact.
    pub fn save(&self, path: &Path) -> Result<(), SplatError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        write!(w, "ply\nformat binary_little_endian 1.0\n")?;
        write!(w, "comment scene_scale {}\n", self.scene_scale)?;
        write!(w, "element vertex {}\n", self.gaussians.len())?;
        for p in PLY_PROPS {
            write!(w, "property double {p}\n")?;
        }
        write!(w, "property uchar reflective\nend_header\n")?;
        for g in &self.gaussians {
            for v in [g.mu.x, g.mu.y, g.mu.z] {
                w.write_f64::<LittleEndian>(v)?;
            }
            let q = g.quat.quaternion();
            for v in [q.w, q.i, q.j, q.k] {
                w.write_f64::<LittleEndian>(v)?;
            }
            for v in [g.log_scale.x, g.log_scale.y, g.log_scale.z, g.opacity_logit] {
                w.write_f64::<LittleEndian>(v)?;
            }
            for v in g.color {
                w.write_f64::<LittleEndian>(v)?;
            }
            w.write_u8(g.reflective as u8)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SplatError> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim() != "ply" {
            return Err(SplatError::Format("missing ply magic".into()));
        }
        let mut count = None;
        let mut scene_scale = 1.0;
        let mut props: Vec<String> = Vec::new();
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(SplatError::Format("unterminated header".into()));
            }
            let t = line.trim();
            if t == "end_header" {
                break;
            }
            if let Some(rest) = t.strip_prefix("comment scene_scale ") {
                scene_scale = rest
                    .parse()
                    .map_err(|_| SplatError::Format("bad scene_scale".into()))?;
            } else if let Some(rest) = t.strip_prefix("element vertex ") {
                count = Some(
                    rest.parse::<usize>()
                        .map_err(|_| SplatError::Format("bad vertex count".into()))?,
                );
            } else if let Some(rest) = t.strip_prefix("property double ") {
                props.push(rest.to_string());
            }
        }
        if props != PLY_PROPS {
            return Err(SplatError::Format("unexpected property layout".into()));
        }
        let count = count.ok_or_else(|| SplatError::Format("missing vertex element".into()))?;
        let mut gaussians = Vec::with_capacity(count);
        for _ in 0..count {
            let mut f = [0.0f64; 14];
            for v in f.iter_mut() {
                *v = r.read_f64::<LittleEndian>()?;
            }
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            let quat = UnitQuaternion::from_quaternion(Quaternion::new(f[3], f[4], f[5], f[6]));
            gaussians.push(Gaussian {
                mu: Vector3::new(f[0], f[1], f[2]),
                quat,
                log_scale: Vector3::new(f[7], f[8], f[9]),
                opacity_logit: f[10],
                color: [f[11], f[12], f[13]],
                reflective: flag[0] != 0,
            });
        }
        Ok(Self {
            gaussians,
            scene_scale,
        })
    }
}
