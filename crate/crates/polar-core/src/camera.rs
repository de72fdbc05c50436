//! Pinhole camera model with rigid world-to-camera pose.
//!
//! Conventions: the camera frame is x-right, y-down, z-forward; pixel
//! coordinates are continuous with (cx, cy) on the optical axis.
//!
//! Normal maps use a separate "view frame" (x-right, y-up, z-toward-camera)
//! so that a surface facing the camera has normal (0, 0, 1) and the azimuth
//! read off a normal matches the A/DoLP azimuth convention. The two frames
//! differ by the 180-degree rotation about x, `Self::FLIP`.

use nalgebra::{Matrix3, Matrix4, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::CoreError;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_to_cam: Matrix4<f64>,
}

#[derive(Serialize, Deserialize)]
struct CameraJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
    /// Row-major 4x4 rigid transform.
    world_to_cam: Vec<f64>,
}

impl CameraModel {
    /// Rotation taking camera-frame vectors into the view frame used for
    /// normal maps (flips y and z).
    pub const FLIP: Matrix3<f64> = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);

    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        world_to_cam: Matrix4<f64>,
    ) -> Result<Self, CoreError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            world_to_cam,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(CoreError::Config("focal lengths must be positive".into()));
        }
        let r = self.rotation();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err >= 1e-6 {
            return Err(CoreError::Config(format!(
                "rotation block is not orthonormal (deviation {err:.2e})"
            )));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.world_to_cam.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.world_to_cam.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Camera center in world coordinates.
    pub fn position(&self) -> Point3<f64> {
        let r = self.rotation();
        Point3::from(-(r.transpose() * self.translation()))
    }

    pub fn to_camera(&self, x_world: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation() * x_world.coords + self.translation())
    }

    pub fn to_world(&self, x_cam: &Point3<f64>) -> Point3<f64> {
        let r = self.rotation();
        Point3::from(r.transpose() * (x_cam.coords - self.translation()))
    }

    /// Perspective projection of a world point; returns pixel coordinates and
    /// the camera-frame depth.
    pub fn project_point(&self, x_world: &Point3<f64>) -> Result<(Vector2<f64>, f64), CoreError> {
        let c = self.to_camera(x_world);
        self.project_camera(&c)
    }

    /// Projection of a point already in the camera frame.
    pub fn project_camera(&self, c: &Point3<f64>) -> Result<(Vector2<f64>, f64), CoreError> {
        if c.z <= 0.0 {
            return Err(CoreError::BehindCamera(c.z));
        }
        let x = (c.x * self.fx + self.cx * c.z) / c.z;
        let y = (c.y * self.fy + self.cy * c.z) / c.z;
        Ok((Vector2::new(x, y), c.z))
    }

    /// Back-projection of a pixel at a given depth into the camera frame.
    pub fn backproject_camera(
        &self,
        pixel: &Vector2<f64>,
        depth: f64,
    ) -> Result<Point3<f64>, CoreError> {
        if depth <= 0.0 {
            return Err(CoreError::Domain(format!("depth must be positive, got {depth}")));
        }
        Ok(Point3::new(
            (pixel.x - self.cx) * depth / self.fx,
            (pixel.y - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// Back-projection into world coordinates; exact inverse of `project_point`.
    pub fn backproject_pixel(
        &self,
        pixel: &Vector2<f64>,
        depth: f64,
    ) -> Result<Point3<f64>, CoreError> {
        Ok(self.to_world(&self.backproject_camera(pixel, depth)?))
    }

    /// Unnormalized camera-frame ray direction through a pixel (z = 1).
    pub fn pixel_ray(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
    }

    /// World-frame normal to the view frame of this camera (y-up,
    /// z-toward-camera), oriented toward the camera.
    pub fn normal_to_view(&self, n_world: &Vector3<f64>) -> Vector3<f64> {
        let n = Self::FLIP * (self.rotation() * n_world);
        if n.z < 0.0 {
            -n
        } else {
            n
        }
    }

    /// Inverse of [`Self::normal_to_view`] up to sign.
    pub fn normal_to_world(&self, n_view: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (Self::FLIP * n_view)
    }

    pub fn to_json(&self) -> String {
        let j = CameraJson {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
            world_to_cam: self.world_to_cam.transpose().as_slice().to_vec(),
        };
        serde_json::to_string_pretty(&j).expect("camera serialization")
    }

    pub fn from_json(s: &str) -> Result<Self, CoreError> {
        let j: CameraJson =
            serde_json::from_str(s).map_err(|e| CoreError::Format(format!("camera json: {e}")))?;
        if j.world_to_cam.len() != 16 {
            return Err(CoreError::Format(format!(
                "world_to_cam must have 16 entries, got {}",
                j.world_to_cam.len()
            )));
        }
        // Row-major input; nalgebra's from_iterator is column-major.
        let m = Matrix4::from_iterator(j.world_to_cam.iter().copied()).transpose();
        Self::new(j.fx, j.fy, j.cx, j.cy, j.width, j.height, m)
    }

    pub fn save(&self, path: &Path) -> Result<(), CoreError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn identity_cam() -> CameraModel {
        CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100, Matrix4::identity()).unwrap()
    }

    #[test]
    fn optical_axis_projects_to_center() {
        let cam = identity_cam();
        let (px, d) = cam.project_point(&Point3::new(0.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(px.x, 50.0);
        assert_relative_eq!(px.y, 50.0);
        assert_relative_eq!(d, 1.0);
    }

    #[test]
    fn off_axis_projection() {
        let cam = identity_cam();
        let (px, _) = cam.project_point(&Point3::new(0.1, 0.0, 1.0)).unwrap();
        assert_relative_eq!(px.x, 60.0, epsilon = 1e-12);
        assert_relative_eq!(px.y, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_errors() {
        let cam = identity_cam();
        assert!(matches!(
            cam.project_point(&Point3::new(0.0, 0.0, -1.0)),
            Err(CoreError::BehindCamera(_))
        ));
        assert!(cam
            .backproject_pixel(&Vector2::new(10.0, 10.0), -0.5)
            .is_err());
    }

    #[test]
    fn backproject_principal_point() {
        let cam = identity_cam();
        let p = cam
            .backproject_camera(&Vector2::new(50.0, 50.0), 3.0)
            .unwrap();
        assert_relative_eq!(p.coords.norm(), 3.0);
        assert_relative_eq!(p.z, 3.0);
    }

    #[test]
    fn backproject_one_focal_off() {
        let cam = identity_cam();
        let p = cam
            .backproject_camera(&Vector2::new(150.0, 50.0), 2.0)
            .unwrap();
        assert_relative_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0);
        assert_relative_eq!(p.z, 2.0);
    }

    #[test]
    fn project_backproject_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 0.7);
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&Vector3::new(0.2, -0.4, 1.5));
        let cam = CameraModel::new(180.0, 175.0, 64.0, 60.0, 128, 120, m).unwrap();
        for _ in 0..200 {
            let px = Vector2::new(rng.gen_range(0.0..128.0), rng.gen_range(0.0..120.0));
            let d = rng.gen_range(0.1..10.0);
            let x = cam.backproject_pixel(&px, d).unwrap();
            let (px2, d2) = cam.project_point(&x).unwrap();
            assert_relative_eq!(px2.x, px.x, max_relative = 1e-9);
            assert_relative_eq!(px2.y, px.y, max_relative = 1e-9);
            assert_relative_eq!(d2, d, max_relative = 1e-9);
        }
    }

    #[test]
    fn json_roundtrip() {
        let cam = identity_cam();
        let cam2 = CameraModel::from_json(&cam.to_json()).unwrap();
        assert_eq!(cam, cam2);
    }

    #[test]
    fn json_rejects_bad_rotation() {
        let mut m = Matrix4::identity();
        m[(0, 0)] = 2.0;
        assert!(CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100, m).is_err());
    }

    #[test]
    fn view_frame_normal_faces_camera() {
        let cam = identity_cam();
        // A surface at +z facing back toward the camera.
        let n = cam.normal_to_view(&Vector3::new(0.0, 0.0, -1.0));
        assert_relative_eq!(n.z, 1.0);
        // Round trip up to the orientation flip.
        let w = cam.normal_to_world(&n);
        assert_relative_eq!(w.z, -1.0);
    }
}
