use nalgebra::Matrix4;
use polar_core::{aolp_dolp, stokes_from_angles, CameraModel, FloatImage, PolarizedCapture};
use proptest::prelude::*;

fn cam() -> CameraModel {
    CameraModel::new(10.0, 10.0, 0.5, 0.5, 1, 1, Matrix4::identity()).unwrap()
}

proptest! {
    #[test]
    fn stokes_stays_physical(
        i0 in 0.0f64..1.0,
        i45 in 0.0f64..1.0,
        i90 in 0.0f64..1.0,
        i135 in 0.0f64..1.0,
    ) {
        let mk = |v| FloatImage::from_data(1, 1, 1, vec![v]).unwrap();
        let cap = PolarizedCapture {
            view_id: 0,
            images: [mk(i0), mk(i45), mk(i90), mk(i135)],
            camera: cam(),
        };
        let s = stokes_from_angles(&cap).unwrap();
        let (s0, s1, s2) = (s.s0.get(0, 0, 0), s.s1.get(0, 0, 0), s.s2.get(0, 0, 0));
        prop_assert!(s0 >= 0.0);
        prop_assert!(s1 * s1 + s2 * s2 <= s0 * s0 + 1e-6);
        let m = aolp_dolp(&s);
        let rho = m.dolp.get(0, 0, 0);
        let phi = m.aolp.get(0, 0, 0);
        prop_assert!((0.0..=1.0).contains(&rho));
        prop_assert!((0.0..std::f64::consts::PI).contains(&phi));
    }
}
