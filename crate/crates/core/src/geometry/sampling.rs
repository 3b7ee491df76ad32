use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, WeightedIndex};

use super::{GeometryError, DEGENERATE_FACE_AREA};
use crate::model::{PointCloud, TriMesh};

/// Dense surface sample size used for candidate selection and grasp proposals.
pub const DEFAULT_SURFACE_SAMPLES: usize = 20_000;

/// Area-weighted uniform surface samples with the source face normal attached.
///
/// A face is drawn with probability proportional to its area, then a point is
/// drawn uniformly over it by reflected barycentric coordinates. Degenerate
/// faces never receive samples.
pub fn surface_sample(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    if n == 0 {
        return Err(GeometryError::Argument("sample count must be at least 1".into()));
    }
    let weights: Vec<f64> = (0..mesh.faces().len())
        .map(|f| {
            let area = mesh.face_area(f);
            if area < DEGENERATE_FACE_AREA {
                0.0
            } else {
                area
            }
        })
        .collect();
    let faces = WeightedIndex::new(&weights)
        .map_err(|_| GeometryError::Degenerate("mesh has zero total surface area".into()))?;
    let normals: Vec<_> = (0..mesh.faces().len())
        .map(|f| mesh.face_cross(f).normalize())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut point_normals = Vec::with_capacity(n);
    for _ in 0..n {
        let f = faces.sample(&mut rng);
        let [a, b, c] = mesh.triangle(f);
        let mut u: f64 = rng.gen();
        let mut v: f64 = rng.gen();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        points.push(a + (b - a) * u + (c - a) * v);
        point_normals.push(normals[f]);
    }
    Ok(PointCloud::new(points, Some(point_normals)).expect("face normals are unit length"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point3;

    fn two_triangles() -> TriMesh {
        // areas 1 and 3 in the z = 0 plane
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(13.0, 0.0, 0.0),
                Point3::new(10.0, 2.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap()
    }

    #[test]
    fn default_count_matches_dataset_setting() {
        assert_eq!(DEFAULT_SURFACE_SAMPLES, 20_000);
    }

    #[test]
    fn samples_lie_inside_a_single_triangle() {
        let mesh = TriMesh::new(
            vec![Point3::new(0.0, 0.0, 1.0), Point3::new(1.0, 0.0, 1.0), Point3::new(0.0, 1.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let cloud = surface_sample(&mesh, 100, 7).unwrap();
        assert_eq!(cloud.len(), 100);
        for (p, n) in cloud.points().iter().zip(cloud.normals().unwrap()) {
            assert!((p.z - 1.0).abs() <= 1e-9);
            assert!(p.x >= -1e-12 && p.y >= -1e-12 && p.x + p.y <= 1.0 + 1e-12);
            assert!((n.z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn share_follows_area() {
        let cloud = surface_sample(&two_triangles(), 20_000, 1).unwrap();
        let large = cloud.points().iter().filter(|p| p.x >= 10.0).count();
        let share = large as f64 / 20_000.0;
        assert!((0.73..=0.77).contains(&share), "{share}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = surface_sample(&two_triangles(), 50, 9).unwrap();
        let b = surface_sample(&two_triangles(), 50, 9).unwrap();
        let c = surface_sample(&two_triangles(), 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_faces_are_skipped_or_rejected() {
        let flat = TriMesh::new(
            vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(surface_sample(&flat, 10, 0), Err(GeometryError::Degenerate(_))));
        assert!(matches!(surface_sample(&two_triangles(), 0, 0), Err(GeometryError::Argument(_))));

        let mixed = two_triangles().merged(&flat);
        let cloud = surface_sample(&mixed, 2_000, 3).unwrap();
        assert!(cloud.normals().unwrap().iter().all(|n| (n.z - 1.0).abs() < 1e-12));
    }
}
