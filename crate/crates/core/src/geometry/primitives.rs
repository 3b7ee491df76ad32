//! Closed, outward-wound primitive meshes used as fixtures and demo inputs.

use std::f64::consts::PI;

use nalgebra::Point3;

use crate::model::TriMesh;

fn build(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> TriMesh {
    TriMesh::new(vertices, faces).expect("primitive meshes are well formed")
}

/// Axis-aligned box centered at the origin.
pub fn cuboid(dx: f64, dy: f64, dz: f64) -> TriMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -dx / 2.0 } else { dx / 2.0 },
                if i & 2 == 0 { -dy / 2.0 } else { dy / 2.0 },
                if i & 4 == 0 { -dz / 2.0 } else { dz / 2.0 },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    build(vertices, faces)
}

/// Latitude/longitude sphere centered at the origin with `rings` latitude bands.
pub fn uv_sphere(radius: f64, segments: usize, rings: usize) -> TriMesh {
    assert!(segments >= 3 && rings >= 2);
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for i in 1..rings {
        let theta = PI * i as f64 / rings as f64;
        for j in 0..segments {
            let phi = 2.0 * PI * j as f64 / segments as f64;
            vertices.push(Point3::new(
                radius * theta.sin() * phi.cos(),
                radius * theta.sin() * phi.sin(),
                radius * theta.cos(),
            ));
        }
    }
    let south = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, -radius));

    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + j % segments;
    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            faces.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            faces.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    for j in 0..segments {
        faces.push([ring(rings - 1, j), south, ring(rings - 1, j + 1)]);
    }
    build(vertices, faces)
}

/// Capped cylinder along z, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
    assert!(segments >= 3);
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for z in [height / 2.0, -height / 2.0] {
        for j in 0..segments {
            let phi = 2.0 * PI * j as f64 / segments as f64;
            vertices.push(Point3::new(radius * phi.cos(), radius * phi.sin(), z));
        }
    }
    let top_center = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, height / 2.0));
    let bottom_center = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, -height / 2.0));

    let top = |j: usize| j % segments;
    let bottom = |j: usize| segments + j % segments;
    let mut faces = Vec::new();
    for j in 0..segments {
        faces.push([top(j), bottom(j), bottom(j + 1)]);
        faces.push([top(j), bottom(j + 1), top(j + 1)]);
        faces.push([top_center, top(j), top(j + 1)]);
        faces.push([bottom(j), bottom_center, bottom(j + 1)]);
    }
    build(vertices, faces)
}

/// Right-triangle prism: a vertical face at `x = -width/2`, a base at `z = 0`
/// and a hypotenuse face inclined 45° to the x axis. Extruded along y.
pub fn wedge(width: f64, depth: f64) -> TriMesh {
    let (hw, hd) = (width / 2.0, depth / 2.0);
    let mut vertices = Vec::new();
    for y in [-hd, hd] {
        vertices.push(Point3::new(-hw, y, 0.0));
        vertices.push(Point3::new(hw, y, 0.0));
        vertices.push(Point3::new(-hw, y, width));
    }
    let faces = vec![
        [0, 1, 2],
        [3, 5, 4],
        [0, 3, 4],
        [0, 4, 1],
        [0, 2, 5],
        [0, 5, 3],
        [1, 4, 5],
        [1, 5, 2],
    ];
    build(vertices, faces)
}

/// Translated copy of `mesh`.
pub fn translated(mesh: &TriMesh, dx: f64, dy: f64, dz: f64) -> TriMesh {
    mesh.map_vertices(|p| Point3::new(p.x + dx, p.y + dy, p.z + dz))
        .expect("translation keeps coordinates finite")
}

/// L-shaped footprint made of two overlapping boxes.
pub fn l_shape(long: f64, short: f64, thickness: f64, height: f64) -> TriMesh {
    let a = translated(&cuboid(long, thickness, height), long / 2.0, thickness / 2.0, height / 2.0);
    let b = translated(&cuboid(thickness, short, height), thickness / 2.0, short / 2.0, height / 2.0);
    a.merged(&b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{connected_components, signed_volume};

    #[test]
    fn outward_winding_gives_positive_volume() {
        let cases = [
            (cuboid(0.1, 0.2, 0.3), 0.1 * 0.2 * 0.3, 1e-15),
            (wedge(0.1, 0.2), 0.5 * 0.1 * 0.1 * 0.2, 1e-15),
            (uv_sphere(1.0, 64, 32), 4.0 / 3.0 * PI, 0.02),
            (cylinder(1.0, 2.0, 64), 2.0 * PI, 0.01),
        ];
        for (mesh, expected, rel) in cases {
            let v = signed_volume(&mesh);
            assert!(v > 0.0);
            assert!((v - expected).abs() <= rel * expected, "{v} vs {expected}");
            assert_eq!(connected_components(&mesh).len(), 1);
        }
    }
}
