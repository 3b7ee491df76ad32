use nalgebra::{Point3, Vector2};
use serde::{Deserialize, Serialize};

use super::{mesh_obb, GeometryError};
use crate::model::{PlacementAnnotation, Quat, TriMesh};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum UpAxis {
    X,
    Y,
    #[default]
    Z,
}

impl UpAxis {
    fn index(self) -> usize {
        match self {
            UpAxis::X => 0,
            UpAxis::Y => 1,
            UpAxis::Z => 2,
        }
    }

    /// Coordinates in the plane perpendicular to the up axis.
    fn horizontal(self, p: &Point3<f64>) -> Vector2<f64> {
        match self {
            UpAxis::X => Vector2::new(p.y, p.z),
            UpAxis::Y => Vector2::new(p.z, p.x),
            UpAxis::Z => Vector2::new(p.x, p.y),
        }
    }
}

/// Uniformly scales the mesh about the origin so its longest OBB side equals
/// `target_longest_axis`.
pub fn rescale_to_dims(mesh: &TriMesh, target_longest_axis: f64) -> Result<(TriMesh, f64), GeometryError> {
    if !(target_longest_axis.is_finite() && target_longest_axis > 0.0) {
        return Err(GeometryError::Argument(format!(
            "target length {target_longest_axis} must be positive"
        )));
    }
    if mesh.vertices().is_empty() {
        return Err(GeometryError::Degenerate("mesh has no vertices".into()));
    }
    let current = mesh_obb(mesh)?.longest_axis();
    if current <= 0.0 {
        return Err(GeometryError::Degenerate("mesh has zero extent".into()));
    }
    let factor = target_longest_axis / current;
    let scaled = mesh
        .map_vertices(|p| Point3::from(p.coords * factor))
        .map_err(|e| GeometryError::Argument(e.to_string()))?;
    Ok((scaled, factor))
}

fn projected_centroid(mesh: &TriMesh, up: UpAxis) -> Vector2<f64> {
    let sum = mesh
        .vertices()
        .iter()
        .fold(Vector2::zeros(), |acc, p| acc + up.horizontal(p));
    sum / mesh.vertices().len() as f64
}

/// Largest horizontal distance of any vertex from the projected vertex centroid.
pub fn collision_radius(mesh: &TriMesh, up: UpAxis) -> Result<f64, GeometryError> {
    if mesh.vertices().is_empty() {
        return Err(GeometryError::Degenerate("mesh has no vertices".into()));
    }
    let center = projected_centroid(mesh, up);
    let radius = mesh
        .vertices()
        .iter()
        .map(|p| (up.horizontal(p) - center).norm())
        .fold(0.0, f64::max);
    if radius > 0.0 {
        Ok(radius)
    } else {
        Err(GeometryError::Degenerate("mesh has no horizontal extent".into()))
    }
}

/// Resting placement: origin at the projected centroid on the plane through the
/// lowest vertex, upright orientation, and the footprint's collision radius.
pub fn placement_annotation(mesh: &TriMesh, up: UpAxis) -> Result<PlacementAnnotation, GeometryError> {
    let radius = collision_radius(mesh, up)?;
    let center = projected_centroid(mesh, up);
    let axis = up.index();
    let lowest = mesh.vertices().iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
    let position = match up {
        UpAxis::X => Point3::new(lowest, center.x, center.y),
        UpAxis::Y => Point3::new(center.y, lowest, center.x),
        UpAxis::Z => Point3::new(center.x, center.y, lowest),
    };
    Ok(PlacementAnnotation {
        placement_position: position,
        placement_orientation: Quat::IDENTITY,
        collision_radius: radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{cuboid, cylinder, l_shape, translated};

    #[test]
    fn rescale_arithmetic() {
        let mesh = cuboid(2.0, 1.0, 0.5);
        let (scaled, factor) = rescale_to_dims(&mesh, 0.30).unwrap();
        assert!((factor - 0.15).abs() < 1e-12);
        assert!((mesh_obb(&scaled).unwrap().longest_axis() - 0.30).abs() < 1e-6 * 0.30);
    }

    #[test]
    fn rescale_identity() {
        let mesh = translated(&cuboid(0.2, 0.1, 0.05), 0.01, 0.02, 0.03);
        let current = mesh_obb(&mesh).unwrap().longest_axis();
        let (scaled, factor) = rescale_to_dims(&mesh, current).unwrap();
        assert_eq!(factor, 1.0);
        assert_eq!(scaled, mesh);
    }

    #[test]
    fn rescale_to_small_object() {
        // 0.37 m asset down to 0.05 m, checked by refitting the box
        let mesh = cuboid(0.37, 0.2, 0.1);
        let (scaled, factor) = rescale_to_dims(&mesh, 0.05).unwrap();
        assert!((factor - 0.05 / 0.37).abs() < 1e-12);
        assert!((factor - 0.1351).abs() < 1e-4);
        let refit = mesh_obb(&scaled).unwrap();
        assert!((refit.longest_axis() - 0.05).abs() <= 1e-6 * 0.05);
    }

    #[test]
    fn rescale_rejects_bad_target() {
        let mesh = cuboid(1.0, 1.0, 1.0);
        assert!(matches!(rescale_to_dims(&mesh, 0.0), Err(GeometryError::Argument(_))));
        assert!(matches!(rescale_to_dims(&mesh, -1.0), Err(GeometryError::Argument(_))));
    }

    #[test]
    fn cube_radius() {
        let r = collision_radius(&cuboid(1.0, 1.0, 1.0), UpAxis::Z).unwrap();
        assert!((r - 0.5f64.hypot(0.5)).abs() < 1e-12);
        assert!((r - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn cylinder_radius() {
        let r = collision_radius(&cylinder(0.04, 0.2, 32), UpAxis::Z).unwrap();
        assert!((r - 0.04).abs() < 1e-12);
    }

    #[test]
    fn l_shape_matches_brute_force() {
        let mesh = l_shape(0.3, 0.2, 0.05, 0.1);
        let n = mesh.vertices().len() as f64;
        let (sx, sy) = mesh.vertices().iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        let (cx, cy) = (sx / n, sy / n);
        let brute = mesh
            .vertices()
            .iter()
            .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
            .fold(0.0, f64::max);
        assert_eq!(collision_radius(&mesh, UpAxis::Z).unwrap(), brute);
    }

    #[test]
    fn degenerate_footprint() {
        let mesh = TriMesh::new(vec![Point3::new(0.0, 0.0, 0.0); 3], vec![]).unwrap();
        assert!(collision_radius(&mesh, UpAxis::Z).is_err());
    }

    #[test]
    fn placement_rests_on_lowest_point() {
        let mesh = translated(&cuboid(0.1, 0.2, 0.3), 1.0, 2.0, 3.0);
        let placement = placement_annotation(&mesh, UpAxis::Z).unwrap();
        assert!((placement.placement_position - Point3::new(1.0, 2.0, 2.85)).norm() < 1e-12);
        placement.validate().unwrap();
    }
}
