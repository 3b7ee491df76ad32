use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::model::TriMesh;

/// Faces below this area (m²) are treated as degenerate.
pub const DEGENERATE_FACE_AREA: f64 = 1e-12;

/// Signed enclosed volume by the divergence theorem; positive for outward winding.
pub fn signed_volume(mesh: &TriMesh) -> f64 {
    (0..mesh.faces().len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            a.coords.dot(&b.coords.cross(&c.coords))
        })
        .sum::<f64>()
        / 6.0
}

pub fn enclosed_volume(mesh: &TriMesh) -> f64 {
    signed_volume(mesh).abs()
}

/// Centroid of the enclosed solid, falling back to the surface centroid and
/// then the vertex mean when the mesh encloses no volume.
pub fn volume_centroid(mesh: &TriMesh) -> Option<Point3<f64>> {
    if mesh.vertices().is_empty() {
        return None;
    }
    let mut moment = Vector3::zeros();
    let mut volume = 0.0;
    let mut area_moment = Vector3::zeros();
    let mut area = 0.0;
    for f in 0..mesh.faces().len() {
        let [a, b, c] = mesh.triangle(f);
        let v = a.coords.dot(&b.coords.cross(&c.coords)) / 6.0;
        volume += v;
        moment += (a.coords + b.coords + c.coords) * (v / 4.0);
        let s = mesh.face_area(f);
        area += s;
        area_moment += (a.coords + b.coords + c.coords) * (s / 3.0);
    }
    if volume.abs() > 1e-15 {
        return Some(Point3::from(moment / volume));
    }
    if area > 0.0 {
        return Some(Point3::from(area_moment / area));
    }
    let sum = mesh.vertices().iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Some(Point3::from(sum / mesh.vertices().len() as f64))
}

pub fn degenerate_face_ratio(mesh: &TriMesh) -> f64 {
    if mesh.faces().is_empty() {
        return 0.0;
    }
    let degenerate = (0..mesh.faces().len())
        .filter(|&f| mesh.face_area(f) < DEGENERATE_FACE_AREA)
        .count();
    degenerate as f64 / mesh.faces().len() as f64
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Groups faces into components connected through shared vertex positions.
/// Coincident vertices are welded, so split-vertex exports stay one piece.
pub fn connected_components(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut canonical: HashMap<[u64; 3], usize> = HashMap::new();
    let weld: Vec<usize> = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // +0.0 folds negative zero onto positive zero
            let key = [(p.x + 0.0).to_bits(), (p.y + 0.0).to_bits(), (p.z + 0.0).to_bits()];
            *canonical.entry(key).or_insert(i)
        })
        .collect();

    let mut parent: Vec<usize> = (0..mesh.vertices().len()).collect();
    for f in mesh.faces() {
        for &v in &f[1..] {
            let a = find(&mut parent, weld[f[0]]);
            let b = find(&mut parent, weld[v]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for (fi, f) in mesh.faces().iter().enumerate() {
        let root = find(&mut parent, weld[f[0]]);
        let g = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(fi);
    }
    groups
}
