//! Camera rings around a target point (world up is +z).

use nalgebra::{Matrix3, Matrix4, Point3, Vector3};
use polar_core::CameraModel;

use crate::SynthError;

#[derive(Debug, Clone, Copy)]
pub struct RingIntrinsics {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
}

/// `n` cameras evenly spaced in azimuth at a fixed elevation, all looking at
/// `look_at` from distance `radius`.
pub fn make_camera_ring(
    n: usize,
    radius: f64,
    elevation: f64,
    look_at: &Point3<f64>,
    intr: RingIntrinsics,
) -> Result<Vec<CameraModel>, SynthError> {
    if n < 2 {
        return Err(SynthError::Config(format!(
            "camera ring needs at least 2 cameras, got {n}"
        )));
    }
    if radius <= 0.0 {
        return Err(SynthError::Config("ring radius must be positive".into()));
    }
    let mut cams = Vec::with_capacity(n);
    for k in 0..n {
        let az = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let offset = Vector3::new(
            az.cos() * elevation.cos(),
            az.sin() * elevation.cos(),
            elevation.sin(),
        ) * radius;
        let pos = look_at + offset;
        cams.push(look_at_camera(&pos, look_at, intr)?);
    }
    Ok(cams)
}

/// Camera at `pos` looking at `target`; x-right, y-down, z-forward.
pub fn look_at_camera(
    pos: &Point3<f64>,
    target: &Point3<f64>,
    intr: RingIntrinsics,
) -> Result<CameraModel, SynthError> {
    let fwd = (target - pos).normalize();
    let up = if fwd.z.abs() > 0.999 {
        Vector3::x()
    } else {
        Vector3::z()
    };
    let right = fwd.cross(&up).normalize();
    let down = fwd.cross(&right).normalize();
    let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
    let t = -rot * pos.coords;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    let cam = CameraModel::new(
        intr.focal,
        intr.focal,
        intr.width as f64 / 2.0,
        intr.height as f64 / 2.0,
        intr.width,
        intr.height,
        m,
    )?;
    Ok(cam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const INTR: RingIntrinsics = RingIntrinsics {
        width: 64,
        height: 64,
        focal: 80.0,
    };

    #[test]
    fn four_cameras_at_cardinal_azimuths() {
        let cams = make_camera_ring(4, 2.0, 0.0, &Point3::origin(), INTR).unwrap();
        assert_eq!(cams.len(), 4);
        let expected = [(2.0, 0.0), (0.0, 2.0), (-2.0, 0.0), (0.0, -2.0)];
        for (cam, (ex, ey)) in cams.iter().zip(expected) {
            let p = cam.position();
            assert_relative_eq!(p.x, ex, epsilon = 1e-9);
            assert_relative_eq!(p.y, ey, epsilon = 1e-9);
            assert_relative_eq!(p.z, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn all_cameras_at_ring_radius() {
        let look = Point3::new(0.3, -0.1, 0.5);
        let cams = make_camera_ring(7, 3.5, 0.4, &look, INTR).unwrap();
        for cam in &cams {
            assert_relative_eq!((cam.position() - look).norm(), 3.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn rotations_orthonormal_and_target_centered() {
        let cams = make_camera_ring(20, 3.0, 0.6, &Point3::origin(), INTR).unwrap();
        assert_eq!(cams.len(), 20);
        for cam in &cams {
            let r = cam.rotation();
            let dev = (r.transpose() * r - Matrix3::identity()).abs().max();
            assert!(dev < 1e-9, "orthonormality deviation {dev}");
            // look_at projects to the principal point.
            let (px, _) = cam.project_point(&Point3::origin()).unwrap();
            assert_relative_eq!(px.x, 32.0, epsilon = 1e-6);
            assert_relative_eq!(px.y, 32.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn too_few_cameras_is_config_error() {
        assert!(make_camera_ring(1, 2.0, 0.0, &Point3::origin(), INTR).is_err());
    }
}
