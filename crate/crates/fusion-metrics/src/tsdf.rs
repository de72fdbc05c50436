//! Truncated signed-distance voxel grid accumulated from depth maps.

use nalgebra::{Point3, Vector3};
use polar_core::{CameraModel, FloatImage};

use crate::FusionError;

/// Regular voxel grid of normalized truncated signed distances. Samples live
/// on lattice points `origin + index * voxel_size`; `tsdf` holds the signed
/// distance divided by `truncation`, so values lie in [-1, 1] (positive in
/// free space, negative behind the observed surface).
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    pub voxel_size: f64,
    pub truncation: f64,
    /// Depth cutoff: observations farther than this are ignored.
    pub max_depth: f64,
    pub origin: Vector3<f64>,
    /// Lattice points per axis.
    pub dims: [usize; 3],
    pub tsdf: Vec<f64>,
    pub weight: Vec<f64>,
}

impl TsdfVolume {
    pub fn new(
        origin: Vector3<f64>,
        dims: [usize; 3],
        voxel_size: f64,
        truncation: f64,
        max_depth: f64,
    ) -> Result<Self, FusionError> {
        if voxel_size <= 0.0 {
            return Err(FusionError::Parameter(format!(
                "voxel_size must be positive, got {voxel_size}"
            )));
        }
        if truncation < voxel_size {
            return Err(FusionError::Parameter(format!(
                "truncation {truncation} must be at least the voxel size {voxel_size}"
            )));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(FusionError::Parameter(format!(
                "each dimension needs at least 2 lattice points, got {dims:?}"
            )));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(Self {
            voxel_size,
            truncation,
            max_depth,
            origin,
            dims,
            tsdf: vec![0.0; n],
            weight: vec![0.0; n],
        })
    }

    /// Grid covering the axis-aligned box [lo, hi] (expanded to the lattice).
    pub fn for_bounds(
        lo: Vector3<f64>,
        hi: Vector3<f64>,
        voxel_size: f64,
        truncation: f64,
        max_depth: f64,
    ) -> Result<Self, FusionError> {
        if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            return Err(FusionError::Parameter(format!(
                "bounds must satisfy lo < hi per axis, got {lo:?}, {hi:?}"
            )));
        }
        let dims = [
            ((hi.x - lo.x) / voxel_size).ceil() as usize + 1,
            ((hi.y - lo.y) / voxel_size).ceil() as usize + 1,
            ((hi.z - lo.z) / voxel_size).ceil() as usize + 1,
        ];
        Self::new(lo, dims, voxel_size, truncation, max_depth)
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    /// World position of a lattice point.
    #[inline]
    pub fn point(&self, x: usize, y: usize, z: usize) -> Vector3<f64> {
        self.origin + Vector3::new(x as f64, y as f64, z as f64) * self.voxel_size
    }

    /// Overwrites the grid with an analytic signed-distance field (weight 1
    /// everywhere), normalized and clamped like an integrated observation.
    pub fn fill_sdf<F: Fn(&Vector3<f64>) -> f64>(&mut self, sdf: F) {
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    let i = self.idx(x, y, z);
                    let p = self.point(x, y, z);
                    self.tsdf[i] = (sdf(&p) / self.truncation).clamp(-1.0, 1.0);
                    self.weight[i] = 1.0;
                }
            }
        }
    }
}

/// Fuses one depth map: every lattice point that projects into the image
/// with camera depth in (0, max_depth] and a valid (nonzero) depth sample
/// within one truncation band receives the weight-1 running average of
/// clamp(d_pixel - z_point, +-truncation) / truncation. Points more than one
/// truncation behind the surface are occluded and left untouched.
pub fn integrate_depth(
    vol: &mut TsdfVolume,
    depth: &FloatImage,
    cam: &CameraModel,
) -> Result<(), FusionError> {
    if depth.channels() != 1 {
        return Err(FusionError::Dimension(format!(
            "depth map must have 1 channel, got {}",
            depth.channels()
        )));
    }
    if depth.width() != cam.width || depth.height() != cam.height {
        return Err(FusionError::Dimension(format!(
            "depth {}x{} vs camera {}x{}",
            depth.width(),
            depth.height(),
            cam.width,
            cam.height
        )));
    }
    for z in 0..vol.dims[2] {
        for y in 0..vol.dims[1] {
            for x in 0..vol.dims[0] {
                let p = Point3::from(vol.point(x, y, z));
                let Ok((px, zc)) = cam.project_point(&p) else {
                    continue;
                };
                if zc <= 0.0 || zc > vol.max_depth {
                    continue;
                }
                let (ix, iy) = (px.x.round(), px.y.round());
                if ix < 0.0 || iy < 0.0 || ix >= cam.width as f64 || iy >= cam.height as f64 {
                    continue;
                }
                let d = depth.get(ix as usize, iy as usize, 0);
                if d <= 0.0 {
                    continue;
                }
                let sdf = d - zc;
                if sdf < -vol.truncation {
                    continue;
                }
                let v = (sdf.min(vol.truncation)) / vol.truncation;
                let i = vol.idx(x, y, z);
                let w = vol.weight[i];
                vol.tsdf[i] = (vol.tsdf[i] * w + v) / (w + 1.0);
                vol.weight[i] = w + 1.0;
            }
        }
    }
    Ok(())
}
