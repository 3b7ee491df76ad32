use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector2, Vector3};

use super::GeometryError;
use crate::model::{OrientedBoundingBox, PointCloud, TriMesh};

/// Oriented bounding box of a point cloud.
pub fn compute_obb(cloud: &PointCloud) -> Result<OrientedBoundingBox, GeometryError> {
    obb_of_points(cloud.points())
}

/// Oriented bounding box of the mesh vertices (which bound the whole surface).
pub fn mesh_obb(mesh: &TriMesh) -> Result<OrientedBoundingBox, GeometryError> {
    obb_of_points(mesh.vertices())
}

/// Box axes come from the covariance eigenbasis. When the spectrum does not
/// pin the axes down (cubes, squares, spheres) a set of alternative bases
/// built from extreme-point directions is scored too, and the smallest box
/// wins. Extents are always taken over every input point.
pub fn obb_of_points(points: &[Point3<f64>]) -> Result<OrientedBoundingBox, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::Argument("cannot bound an empty point set".into()));
    }
    let pca = pca_basis(points);

    let support = support_points(points, &pca);
    let mut best = pca;
    let mut best_volume = box_volume(&support, &pca);
    for basis in candidate_bases(&support) {
        let volume = box_volume(&support, &basis);
        if volume < best_volume * (1.0 - 1e-9) {
            best = basis;
            best_volume = volume;
        }
    }
    Ok(fit_box(points, &best))
}

fn pca_basis(points: &[Point3<f64>]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eigen = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    right_handed(Matrix3::from_columns(&[
        eigen.eigenvectors.column(order[0]).into_owned(),
        eigen.eigenvectors.column(order[1]).into_owned(),
        eigen.eigenvectors.column(order[2]).into_owned(),
    ]))
}

fn right_handed(mut basis: Matrix3<f64>) -> Matrix3<f64> {
    if basis.determinant() < 0.0 {
        let flipped = -basis.column(2);
        basis.set_column(2, &flipped);
    }
    basis
}

fn extents(points: &[Point3<f64>], basis: &Matrix3<f64>) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for axis in 0..3 {
            let t = basis.column(axis).dot(&p.coords);
            lo[axis] = lo[axis].min(t);
            hi[axis] = hi[axis].max(t);
        }
    }
    (lo, hi)
}

fn box_volume(points: &[Point3<f64>], basis: &Matrix3<f64>) -> f64 {
    let (lo, hi) = extents(points, basis);
    (0..3).map(|i| hi[i] - lo[i]).product()
}

fn fit_box(points: &[Point3<f64>], basis: &Matrix3<f64>) -> OrientedBoundingBox {
    let (lo, hi) = extents(points, basis);
    let mut axes: Vec<(f64, f64, Vector3<f64>)> = (0..3)
        .map(|i| ((hi[i] - lo[i]) / 2.0, (hi[i] + lo[i]) / 2.0, basis.column(i).into_owned()))
        .collect();
    // stable sort keeps the eigen order among equal extents
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let center = axes.iter().fold(Vector3::zeros(), |acc, (_, mid, axis)| acc + axis * *mid);
    let rotation = right_handed(Matrix3::from_columns(&[axes[0].2, axes[1].2, axes[2].2]));
    OrientedBoundingBox {
        center: Point3::from(center),
        rotation,
        half_extents: [axes[0].0, axes[1].0, axes[2].0],
    }
}

/// Small subset of points that determines the box for any basis well enough
/// to rank candidates: everything for small sets, otherwise the extreme point
/// along a fixed set of directions in the PCA frame.
fn support_points(points: &[Point3<f64>], frame: &Matrix3<f64>) -> Vec<Point3<f64>> {
    if points.len() <= 64 {
        return points.to_vec();
    }
    let mut directions = Vec::new();
    for i in -1i32..=1 {
        for j in -1i32..=1 {
            for k in -1i32..=1 {
                if (i, j, k) != (0, 0, 0) {
                    directions.push(Vector3::new(i as f64, j as f64, k as f64).normalize());
                }
            }
        }
    }
    // Fibonacci sphere for the rest
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let m = 96;
    for s in 0..m {
        let z = 1.0 - 2.0 * (s as f64 + 0.5) / m as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * s as f64;
        directions.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
    }
    let mut picked: Vec<usize> = directions
        .iter()
        .map(|d| {
            let world = frame * d;
            let mut best = (0, f64::NEG_INFINITY);
            for (i, p) in points.iter().enumerate() {
                let t = world.dot(&p.coords);
                if t > best.1 {
                    best = (i, t);
                }
            }
            best.0
        })
        .collect();
    picked.sort_unstable();
    picked.dedup();
    picked.into_iter().map(|i| points[i]).collect()
}

/// For each direction between two support points, the minimum-area rectangle
/// of the projection onto the orthogonal plane completes a basis.
fn candidate_bases(support: &[Point3<f64>]) -> Vec<Matrix3<f64>> {
    let scale = support
        .iter()
        .flat_map(|p| p.iter().map(|c| c.abs()))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut bases = Vec::new();
    for i in 0..support.len() {
        for j in i + 1..support.len() {
            let d = support[j] - support[i];
            if d.norm() <= 1e-9 * scale {
                continue;
            }
            let axis = d.normalize();
            if let Some(basis) = basis_around(support, &axis) {
                bases.push(basis);
            }
        }
    }
    bases
}

fn basis_around(support: &[Point3<f64>], axis: &Vector3<f64>) -> Option<Matrix3<f64>> {
    let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = axis.cross(&helper).normalize();
    let e2 = axis.cross(&e1);
    let planar: Vec<Vector2<f64>> = support
        .iter()
        .map(|p| Vector2::new(e1.dot(&p.coords), e2.dot(&p.coords)))
        .collect();
    let hull = convex_hull(planar);
    let direction = if hull.len() < 2 {
        Vector2::x()
    } else {
        min_area_direction(&hull)?
    };
    let u = (e1 * direction.x + e2 * direction.y).normalize();
    Some(right_handed(Matrix3::from_columns(&[*axis, u, axis.cross(&u)])))
}

/// Andrew's monotone chain; counter-clockwise, no collinear points.
fn convex_hull(mut pts: Vec<Vector2<f64>>) -> Vec<Vector2<f64>> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

fn min_area_direction(hull: &[Vector2<f64>]) -> Option<Vector2<f64>> {
    let mut best: Option<(f64, Vector2<f64>)> = None;
    for i in 0..hull.len() {
        let edge = hull[(i + 1) % hull.len()] - hull[i];
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        let u = edge / len;
        let v = Vector2::new(-u.y, u.x);
        let (mut ulo, mut uhi, mut vlo, mut vhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in hull {
            let (a, b) = (u.dot(p), v.dot(p));
            ulo = ulo.min(a);
            uhi = uhi.max(a);
            vlo = vlo.min(b);
            vhi = vhi.max(b);
        }
        let area = (uhi - ulo) * (vhi - vlo);
        if best.map_or(true, |(a, _)| area < a) {
            best = Some((area, u));
        }
    }
    best.map(|(_, u)| u)
}
