//! Analytic ray intersection and surface gradients for the parametric shapes.

use nalgebra::{Point3, Vector3};

use crate::spec::Shape;

/// Closest positive ray intersection, if any.
pub fn intersect(shape: &Shape, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    match *shape {
        Shape::Sphere { radius } => {
            let oc = origin.coords;
            let b = oc.dot(dir);
            let c = oc.norm_squared() - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let t = -b - disc.sqrt();
            (t > 1e-9).then_some(t)
        }
        Shape::Plane { extent } => {
            if dir.z.abs() < 1e-12 {
                return None;
            }
            let t = -origin.z / dir.z;
            if t <= 1e-9 {
                return None;
            }
            let p = origin + dir * t;
            (p.x.abs() <= extent && p.y.abs() <= extent).then_some(t)
        }
        Shape::Supershape { .. } => intersect_implicit(shape, origin, dir),
    }
}

/// Outward unit surface normal from the analytic shape gradient.
pub fn normal(shape: &Shape, p: &Point3<f64>) -> Vector3<f64> {
    match *shape {
        Shape::Sphere { .. } => p.coords.normalize(),
        Shape::Plane { .. } => Vector3::z(),
        Shape::Supershape { a, b, c, e1, e2 } => {
            superellipsoid_gradient(p, a, b, c, e1, e2).normalize()
        }
    }
}

/// Superellipsoid implicit function:
/// f = ((|x/a|^(2/e2) + |y/b|^(2/e2))^(e2/e1) + |z/c|^(2/e1)) - 1.
fn superellipsoid_value(p: &Point3<f64>, a: f64, b: f64, c: f64, e1: f64, e2: f64) -> f64 {
    let gx = (p.x / a).abs().powf(2.0 / e2);
    let gy = (p.y / b).abs().powf(2.0 / e2);
    let gz = (p.z / c).abs().powf(2.0 / e1);
    (gx + gy).powf(e2 / e1) + gz - 1.0
}

fn superellipsoid_gradient(p: &Point3<f64>, a: f64, b: f64, c: f64, e1: f64, e2: f64) -> Vector3<f64> {
    let gx = (p.x / a).abs().powf(2.0 / e2);
    let gy = (p.y / b).abs().powf(2.0 / e2);
    let inner = gx + gy;
    let outer = if inner > 0.0 {
        (e2 / e1) * inner.powf(e2 / e1 - 1.0)
    } else {
        0.0
    };
    let dgx = if p.x != 0.0 {
        (2.0 / e2) * (p.x / a).abs().powf(2.0 / e2 - 1.0) * p.x.signum() / a
    } else {
        0.0
    };
    let dgy = if p.y != 0.0 {
        (2.0 / e2) * (p.y / b).abs().powf(2.0 / e2 - 1.0) * p.y.signum() / b
    } else {
        0.0
    };
    let dgz = if p.z != 0.0 {
        (2.0 / e1) * (p.z / c).abs().powf(2.0 / e1 - 1.0) * p.z.signum() / c
    } else {
        0.0
    };
    Vector3::new(outer * dgx, outer * dgy, dgz)
}

/// Bracketed bisection along the ray against the implicit surface.
fn intersect_implicit(shape: &Shape, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    let Shape::Supershape { a, b, c, e1, e2 } = *shape else {
        return None;
    };
    // Bounding sphere of the superellipsoid.
    let r = a.max(b).max(c) * 1.7321;
    let oc = origin.coords;
    let bq = oc.dot(dir);
    let cq = oc.norm_squared() - r * r;
    let disc = bq * bq - cq;
    if disc < 0.0 {
        return None;
    }
    let t_near = (-bq - disc.sqrt()).max(1e-6);
    let t_far = -bq + disc.sqrt();
    if t_far <= t_near {
        return None;
    }
    let f = |t: f64| superellipsoid_value(&(origin + dir * t), a, b, c, e1, e2);
    let steps = 256;
    let dt = (t_far - t_near) / steps as f64;
    let mut t_prev = t_near;
    let mut f_prev = f(t_prev);
    for i in 1..=steps {
        let t = t_near + i as f64 * dt;
        let ft = f(t);
        if f_prev > 0.0 && ft <= 0.0 {
            // Bisect to high precision.
            let (mut lo, mut hi) = (t_prev, t);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        t_prev = t;
        f_prev = ft;
    }
    None
}
