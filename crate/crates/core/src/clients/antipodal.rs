use std::collections::HashMap;

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ClientError;
use crate::grasp::gripper_boxes;
use crate::model::{GraspPose, GripperModel, PointCloud};

/// Largest angle between one contact normal and the flipped other normal.
pub const ANTIPODAL_MAX_ANGLE_DEG: f64 = 30.0;
/// Upper bound on proposals per object.
pub const DEFAULT_MAX_PROPOSALS: usize = 4_000;
/// Approach directions tried around the jaw axis.
const APPROACH_STEPS: usize = 8;
/// Partner search cells per opening width.
const TUBE_DIVISIONS: usize = 8;
/// Cloud points kept for the collision screen.
const COLLISION_POINTS: usize = 2_000;

/// A proposal together with the surface samples it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AntipodalPair {
    pub first: usize,
    pub second: usize,
    pub pose: GraspPose,
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Point3<f64>, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Grasp frame for contacts `a` and `b`: x closes from `a` toward `b`, z
/// approaches from outside the object (away from `centroid`), y = z × x.
pub(crate) fn grasp_frame(a: &Point3<f64>, b: &Point3<f64>, centroid: &Point3<f64>) -> UnitQuaternion<f64> {
    let x = (b - a).normalize();
    let mid = Point3::from((a.coords + b.coords) / 2.0);
    let perpendicular = |v: Vector3<f64>| v - x * x.dot(&v);
    let mut outward = perpendicular(mid - centroid);
    if outward.norm() < 1e-9 {
        outward = perpendicular(Vector3::z());
    }
    if outward.norm() < 1e-9 {
        outward = perpendicular(Vector3::y());
    }
    let z = -outward.normalize();
    let y = z.cross(&x);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z])))
}

/// Largest of the three antipodal angles: between the two normals, and
/// between each inward normal and the line toward the other contact.
fn antipodal_deviation(pi: &Point3<f64>, ni: &Vector3<f64>, pj: &Point3<f64>, nj: &Vector3<f64>) -> f64 {
    let d = (pj - pi).normalize();
    let angle = |u: &Vector3<f64>, v: &Vector3<f64>| u.dot(v).clamp(-1.0, 1.0).acos();
    angle(ni, &-nj).max(angle(&d, &-ni)).max(angle(&-d, &-nj))
}

/// Cloud points used for the gripper collision screen.
struct Obstacles {
    size: f64,
    grid: HashMap<Cell, Vec<Point3<f64>>>,
}

impl Obstacles {
    fn new(points: &[Point3<f64>], size: f64) -> Self {
        let stride = (points.len() / COLLISION_POINTS).max(1);
        let mut grid: HashMap<Cell, Vec<Point3<f64>>> = HashMap::new();
        for p in points.iter().step_by(stride) {
            grid.entry(cell_of(p, size)).or_default().push(*p);
        }
        Obstacles { size, grid }
    }

    fn hits(&self, pose: &GraspPose, gripper: &GripperModel) -> bool {
        let boxes = gripper_boxes(gripper, pose);
        // every box lies in the slab |y| <= finger_width / 2 of the grasp frame
        let y = boxes[2].axes.column(1).into_owned();
        let slab = gripper.finger_width() / 2.0;
        let (cx, cy, cz) = cell_of(&pose.position, self.size);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(pts) = self.grid.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    if pts
                        .iter()
                        .any(|p| (p - pose.position).dot(&y).abs() <= slab && boxes.iter().any(|b| b.contains(p)))
                    {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Geometric antipodal baseline for grasp proposal.
///
/// Seed points are visited in a seeded random order. For each, partners are
/// searched near the ray along the inward normal, and the one within the
/// gripper opening with the smallest antipodal deviation is taken,
/// provided that deviation is at most [`ANTIPODAL_MAX_ANGLE_DEG`]: both normals
/// and the line between the points must agree within that angle.
/// The approach is the outward direction perpendicular to the jaw axis,
/// turned about that axis in steps until the open gripper holds no cloud
/// point. Confidence is the cosine of the antipodal deviation. Returns at
/// most `max_n` grasps; an object with no valid pair yields an empty list.
pub fn antipodal_pairs(
    cloud: &PointCloud,
    gripper: &GripperModel,
    max_n: usize,
    seed: u64,
) -> Result<Vec<AntipodalPair>, ClientError> {
    let normals = cloud
        .normals()
        .ok_or_else(|| ClientError::Argument("grasp proposal needs surface normals".into()))?;
    if max_n == 0 {
        return Err(ClientError::Argument("max_n must be at least 1".into()));
    }
    gripper
        .validate()
        .map_err(|e| ClientError::Argument(e.to_string()))?;
    let points = cloud.points();
    let Some(centroid) = cloud.centroid() else {
        return Ok(Vec::new());
    };

    let width = gripper.max_opening;
    let cell = width / TUBE_DIVISIONS as f64;
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell_of(p, cell)).or_default().push(i);
    }
    let reach = width / 2.0 + gripper.finger_thickness + gripper.finger_length + gripper.palm_depth;
    let obstacles = Obstacles::new(points, reach);
    let min_cos = ANTIPODAL_MAX_ANGLE_DEG.to_radians().cos();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);

    let mut out = Vec::new();
    for &i in &order {
        if out.len() >= max_n {
            break;
        }
        // best-aligned partner in a tube around the inward normal ray,
        // scored by the smallest of the three antipodal cosines
        let (pi, ni) = (points[i], normals[i]);
        let mut cells: Vec<Cell> = Vec::new();
        for k in 0..=2 * TUBE_DIVISIONS {
            let (cx, cy, cz) = cell_of(&(pi - ni * (width * k as f64 / (2 * TUBE_DIVISIONS) as f64)), cell);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        cells.push((cx + dx, cy + dy, cz + dz));
                    }
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        let mut best: Option<(f64, usize)> = None;
        for j in cells.iter().filter_map(|c| grid.get(c)).flatten().copied() {
            let nj = normals[j];
            let opposed = -ni.dot(&nj);
            if opposed < min_cos {
                continue;
            }
            let d = points[j] - pi;
            let along_i = -ni.dot(&d);
            let along_j = nj.dot(&d);
            if along_i <= 0.0 || along_j <= 0.0 {
                continue;
            }
            let span = d.norm();
            if span > width || span <= 1e-9 {
                continue;
            }
            let score = opposed.min(along_i / span).min(along_j / span);
            if score >= min_cos && best.map_or(true, |(bs, bj)| score > bs || (score == bs && j < bj)) {
                best = Some((score, j));
            }
        }
        let Some((score, j)) = best else { continue };
        let deviation = antipodal_deviation(&points[i], &normals[i], &points[j], &normals[j]);
        debug_assert!((deviation.cos() - score).abs() < 1e-9);
        let base = grasp_frame(&points[i], &points[j], &centroid);
        let jaw = base * Vector3::x_axis();
        let position = Point3::from((points[i].coords + points[j].coords) / 2.0);
        let free = (0..APPROACH_STEPS).find_map(|k| {
            let turn = UnitQuaternion::from_axis_angle(&jaw, TAU * k as f64 / APPROACH_STEPS as f64);
            let pose = GraspPose::new(position, turn * base, deviation.cos().clamp(0.0, 1.0));
            (!obstacles.hits(&pose, gripper)).then_some(pose)
        });
        if let Some(pose) = free {
            out.push(AntipodalPair {
                first: i,
                second: j,
                pose,
            });
        }
    }
    Ok(out)
}
