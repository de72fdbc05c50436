//! Geometric evaluation: area-uniform mesh sampling, symmetric Chamfer
//! distance with a uniform-grid nearest-neighbor index, and normal mean
//! angular error.

use nalgebra::Vector3;
use polar_core::image::BinaryImage;
use polar_core::FloatImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::TriangleMesh;
use crate::FusionError;

/// Draws `n` points uniformly by area from the mesh surface (cumulative-area
/// inversion plus the square-root barycentric trick), deterministically for
/// a given seed.
pub fn sample_mesh(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Vector3<f64>>, FusionError> {
    if mesh.is_empty() {
        return Err(FusionError::Empty("cannot sample an empty mesh".into()));
    }
    let mut cum = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
        total += (b - a).cross(&(c - a)).norm() / 2.0;
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(FusionError::Empty("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen_range(0.0..total);
        let k = cum.partition_point(|&c| c < u).min(cum.len() - 1);
        let [a, b, c] = mesh.triangles[k].map(|i| mesh.vertices[i as usize]);
        let r1: f64 = rng.gen_range(0.0..1.0);
        let r2: f64 = rng.gen_range(0.0..1.0);
        let s = r1.sqrt();
        out.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
    }
    Ok(out)
}

/// Uniform spatial hash over a point set for nearest-neighbor queries.
struct GridIndex<'a> {
    points: &'a [Vector3<f64>],
    cells: std::collections::HashMap<(i64, i64, i64), Vec<u32>>,
    cell_size: f64,
    lo: Vector3<f64>,
    /// Bounds of the occupied cell lattice.
    cell_lo: (i64, i64, i64),
    cell_hi: (i64, i64, i64),
}

impl<'a> GridIndex<'a> {
    fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let ext = hi - lo;
        let volume = (ext.x * ext.y * ext.z).max(1e-30);
        // Aim for a handful of points per occupied cell.
        let cell_size = (volume / points.len() as f64)
            .cbrt()
            .max(ext.norm() / 1e4)
            .max(1e-12);
        let mut cells: std::collections::HashMap<(i64, i64, i64), Vec<u32>> =
            std::collections::HashMap::new();
        let mut cell_lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut cell_hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of(p, &lo, cell_size);
            cell_lo = (cell_lo.0.min(c.0), cell_lo.1.min(c.1), cell_lo.2.min(c.2));
            cell_hi = (cell_hi.0.max(c.0), cell_hi.1.max(c.1), cell_hi.2.max(c.2));
            cells.entry(c).or_default().push(i as u32);
        }
        Self {
            points,
            cells,
            cell_size,
            lo,
            cell_lo,
            cell_hi,
        }
    }

    fn cell_of(p: &Vector3<f64>, lo: &Vector3<f64>, size: f64) -> (i64, i64, i64) {
        (
            ((p.x - lo.x) / size).floor() as i64,
            ((p.y - lo.y) / size).floor() as i64,
            ((p.z - lo.z) / size).floor() as i64,
        )
    }

    /// Distance from `q` to its nearest indexed point, by expanding shell
    /// search around the query cell clamped into the occupied lattice (the
    /// clamp is non-expansive, so the shell lower bound remains valid). A
    /// point in shell r lies at least (r-1) * cell_size from the center, so
    /// once a best within r * cell_size is known the search is complete; the
    /// search also stops when the rings exhaust the occupied bounds.
    fn nearest_distance(&self, q: &Vector3<f64>) -> f64 {
        let c = Self::cell_of(q, &self.lo, self.cell_size);
        let (cx, cy, cz) = (
            c.0.clamp(self.cell_lo.0, self.cell_hi.0),
            c.1.clamp(self.cell_lo.1, self.cell_hi.1),
            c.2.clamp(self.cell_lo.2, self.cell_hi.2),
        );
        let max_r = [
            (cx - self.cell_lo.0).max(self.cell_hi.0 - cx),
            (cy - self.cell_lo.1).max(self.cell_hi.1 - cy),
            (cz - self.cell_lo.2).max(self.cell_hi.2 - cz),
        ]
        .into_iter()
        .max()
        .unwrap();
        let mut best = f64::INFINITY;
        let mut r = 0i64;
        loop {
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs() != r && dy.abs() != r && dz.abs() != r {
                            continue; // interior shells already visited
                        }
                        if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &i in ids {
                                best = best.min((self.points[i as usize] - q).norm());
                            }
                        }
                    }
                }
            }
            if r >= max_r || (best.is_finite() && (r as f64) * self.cell_size >= best) {
                return best;
            }
            r += 1;
        }
    }
}

fn mean_nearest(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> f64 {
    let index = GridIndex::new(to);
    from.iter().map(|p| index.nearest_distance(p)).sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance: the average of the two directed mean
/// nearest-neighbor distances.
pub fn chamfer_distance(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<f64, FusionError> {
    if a.is_empty() || b.is_empty() {
        return Err(FusionError::Empty("chamfer distance needs non-empty sets".into()));
    }
    Ok((mean_nearest(a, b) + mean_nearest(b, a)) / 2.0)
}

/// Mean angular error in degrees between per-pixel normal maps, over masked
/// pixels where both normals are well-defined (norm >= 1e-9).
pub fn normal_mae(
    pred: &FloatImage,
    gt: &FloatImage,
    mask: &BinaryImage,
) -> Result<f64, FusionError> {
    if pred.channels() != 3 || gt.channels() != 3 {
        return Err(FusionError::Dimension("normal maps must have 3 channels".into()));
    }
    if pred.width() != gt.width()
        || pred.height() != gt.height()
        || mask.width() != pred.width()
        || mask.height() != pred.height()
    {
        return Err(FusionError::Dimension("normal maps and mask must share shape".into()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            if !mask.get(x, y) {
                continue;
            }
            let p = pred.pixel(x, y);
            let g = gt.pixel(x, y);
            let np = Vector3::new(p[0], p[1], p[2]);
            let ng = Vector3::new(g[0], g[1], g[2]);
            if np.norm() < 1e-9 || ng.norm() < 1e-9 {
                continue;
            }
            let dot = np.normalize().dot(&ng.normalize()).clamp(-1.0, 1.0);
            sum += dot.acos().to_degrees();
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::extract_mesh;
    use crate::tsdf::TsdfVolume;
    use approx::assert_relative_eq;

    fn sphere_mesh(radius: f64, voxel: f64) -> TriangleMesh {
        let pad = 6.0 * voxel;
        let e = radius + pad;
        let mut vol = TsdfVolume::for_bounds(
            Vector3::new(-e, -e, -e),
            Vector3::new(e, e, e),
            voxel,
            5.0 * voxel,
            10.0,
        )
        .unwrap();
        vol.fill_sdf(|p| p.norm() - radius);
        extract_mesh(&vol)
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let pts: Vec<Vector3<f64>> = (0..100)
            .map(|i| Vector3::new(i as f64 * 0.1, (i % 7) as f64, (i % 3) as f64))
            .collect();
        assert_relative_eq!(chamfer_distance(&pts, &pts).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_separated_points_have_unit_distance() {
        let a = vec![Vector3::new(0.0, 0.0, 0.0)];
        let b = vec![Vector3::new(1.0, 0.0, 0.0)];
        assert_relative_eq!(chamfer_distance(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chamfer_is_exactly_symmetric() {
        let mesh = sphere_mesh(1.0, 0.1);
        let a = sample_mesh(&mesh, 2000, 1).unwrap();
        let mesh2 = sphere_mesh(0.8, 0.1);
        let b = sample_mesh(&mesh2, 2000, 2).unwrap();
        let d1 = chamfer_distance(&a, &b).unwrap();
        let d2 = chamfer_distance(&b, &a).unwrap();
        assert_eq!(d1.to_bits(), d2.to_bits());
    }

    #[test]
    fn chamfer_is_rigid_invariant() {
        let mesh = sphere_mesh(1.0, 0.1);
        let a = sample_mesh(&mesh, 1500, 3).unwrap();
        let b = sample_mesh(&mesh, 1500, 4).unwrap();
        let base = chamfer_distance(&a, &b).unwrap();
        let rot = nalgebra::Rotation3::from_euler_angles(0.4, -0.9, 1.7);
        let t = Vector3::new(5.0, -2.0, 0.7);
        let map = |pts: &[Vector3<f64>]| -> Vec<Vector3<f64>> {
            pts.iter().map(|p| rot * p + t).collect()
        };
        let moved = chamfer_distance(&map(&a), &map(&b)).unwrap();
        assert_relative_eq!(base, moved, epsilon = 1e-9);
    }

    #[test]
    fn inflated_sphere_distance_matches_the_radius_gap() {
        let delta = 0.05;
        let a = sample_mesh(&sphere_mesh(1.0, 0.02), 50_000, 5).unwrap();
        let b = sample_mesh(&sphere_mesh(1.0 + delta, 0.02), 50_000, 6).unwrap();
        let d = chamfer_distance(&a, &b).unwrap();
        assert!(
            (d - delta).abs() / delta < 0.05,
            "chamfer {d}, expected about {delta}"
        );
    }

    #[test]
    fn sampling_is_deterministic_and_on_surface() {
        let mesh = sphere_mesh(1.0, 0.05);
        let a = sample_mesh(&mesh, 500, 9).unwrap();
        let b = sample_mesh(&mesh, 500, 9).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p, q);
        }
        for p in &a {
            assert!((p.norm() - 1.0).abs() < 0.05, "sample off surface: {p:?}");
        }
    }

    #[test]
    fn mae_zero_for_identical_and_ninety_for_orthogonal() {
        let (w, h) = (4, 4);
        let mut a = FloatImage::new(w, h, 3);
        let mut b = FloatImage::new(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                a.set(x, y, 2, 1.0);
                b.set(x, y, 2, 1.0);
            }
        }
        let mask = BinaryImage::filled(w, h, true);
        assert_relative_eq!(normal_mae(&a, &b, &mask).unwrap(), 0.0, epsilon = 1e-12);
        for y in 0..h {
            for x in 0..w {
                b.set(x, y, 0, 1.0);
                b.set(x, y, 2, 0.0);
            }
        }
        assert_relative_eq!(normal_mae(&a, &b, &mask).unwrap(), 90.0, epsilon = 1e-9);
    }

    #[test]
    fn mae_ignores_unmasked_and_degenerate_pixels() {
        let (w, h) = (2, 2);
        let mut a = FloatImage::new(w, h, 3);
        let mut b = FloatImage::new(w, h, 3);
        a.set(0, 0, 2, 1.0);
        b.set(0, 0, 0, 1.0); // orthogonal at (0,0)
        a.set(1, 0, 2, 1.0); // b zero at (1,0): degenerate, skipped
        let mut mask = BinaryImage::new(w, h);
        mask.set(0, 0, true);
        mask.set(1, 0, true);
        assert_relative_eq!(normal_mae(&a, &b, &mask).unwrap(), 90.0, epsilon = 1e-9);
    }
}
