//! Quasi-static grasp check. A grasp passes when the open gripper does not
//! intersect the mesh, both fingers touch it when closing, the two contacts
//! are in force closure and friction holds the object against a lateral load.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::DEGENERATE_FACE_AREA;
use crate::model::{
    FailureReason, GraspPose, GripperModel, PhysicalProperties, TriMesh, VerificationOutcome,
    DEFAULT_DISPLACEMENT_THRESHOLD, REQUIRED_STABLE_FRAMES,
};

/// Displacement reported when friction cannot hold the object.
pub const SLIDE_FAIL_DISPLACEMENT: f64 = 0.02;
/// Rays per pad edge when closing; each pad casts `PAD_RAYS²` rays.
pub const PAD_RAYS: usize = 5;
/// Hits within this fraction of the full opening behind the first one
/// belong to the same contact patch (1 mm on a 0.08 m gripper).
pub const CONTACT_BAND_FRACTION: f64 = 0.0125;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub gravity: f64,
    pub test_acceleration: f64,
    pub displacement_threshold: f64,
    /// Replaces the asset's friction coefficient.
    pub mu: Option<f64>,
    /// Replaces the gripper's squeeze force.
    pub squeeze_force: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            gravity: 9.81,
            test_acceleration: 5.0,
            displacement_threshold: DEFAULT_DISPLACEMENT_THRESHOLD,
            mu: None,
            squeeze_force: None,
        }
    }
}

/// Left sits at −x of the grasp frame, right at +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub position: Point3<f64>,
    /// Unit, pointing out of the object.
    pub normal: Vector3<f64>,
    pub finger: Finger,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub left: Option<Contact>,
    pub right: Option<Contact>,
}

impl ContactSet {
    pub fn is_empty(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }

    pub fn both(&self) -> Option<(&Contact, &Contact)> {
        Some((self.left.as_ref()?, self.right.as_ref()?))
    }

    pub fn len(&self) -> usize {
        self.left.is_some() as usize + self.right.is_some() as usize
    }
}

/// Oriented box in world coordinates; `axes` columns are its local axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperBox {
    pub center: Point3<f64>,
    pub axes: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl GripperBox {
    fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.axes.transpose() * (p - self.center)
    }

    /// Inside or on the boundary.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let l = self.to_local(p);
        (0..3).all(|k| l[k].abs() <= self.half_extents[k])
    }

    fn world_aabb(&self) -> (Vector3<f64>, Vector3<f64>) {
        let r = self.axes.abs() * self.half_extents;
        (self.center.coords - r, self.center.coords + r)
    }
}

fn frame(pose: &GraspPose) -> Matrix3<f64> {
    *pose.orientation.to_unit().to_rotation_matrix().matrix()
}

/// Left finger, right finger and palm at full opening.
pub fn gripper_boxes(gripper: &GripperModel, pose: &GraspPose) -> [GripperBox; 3] {
    let rot = frame(pose);
    let o = gripper.max_opening;
    let t = gripper.finger_thickness;
    let half_w = gripper.finger_width() / 2.0;
    let half_l = gripper.finger_length / 2.0;
    let make = |local_center: Vector3<f64>, half: Vector3<f64>| GripperBox {
        center: pose.position + rot * local_center,
        axes: rot,
        half_extents: half,
    };
    let finger_half = Vector3::new(t / 2.0, half_w, half_l);
    [
        make(Vector3::new(-(o + t) / 2.0, 0.0, 0.0), finger_half),
        make(Vector3::new((o + t) / 2.0, 0.0, 0.0), finger_half),
        make(
            Vector3::new(0.0, 0.0, -half_l - gripper.palm_depth / 2.0),
            Vector3::new(o / 2.0 + t, half_w, gripper.palm_depth / 2.0),
        ),
    ]
}

fn separated_on(axis: &Vector3<f64>, v: &[Vector3<f64>; 3], half: &Vector3<f64>) -> bool {
    let p = v.map(|x| axis.dot(&x));
    let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
    p[0].min(p[1]).min(p[2]) > r || p[0].max(p[1]).max(p[2]) < -r
}

/// Separating-axis test between an oriented box and a triangle. Touching
/// counts as intersecting.
fn box_triangle_intersect(b: &GripperBox, tri: &[Point3<f64>; 3]) -> bool {
    let v = tri.map(|p| b.to_local(&p));
    let e = &b.half_extents;
    for k in 0..3 {
        let lo = v[0][k].min(v[1][k]).min(v[2][k]);
        let hi = v[0][k].max(v[1][k]).max(v[2][k]);
        if lo > e[k] || hi < -e[k] {
            return false;
        }
    }
    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let normal = edges[0].cross(&edges[1]);
    if normal.norm_squared() > 0.0 && separated_on(&normal, &v, e) {
        return false;
    }
    for k in 0..3 {
        let unit = Vector3::ith(k, 1.0);
        for edge in &edges {
            let axis = unit.cross(edge);
            if axis.norm_squared() > 1e-30 && separated_on(&axis, &v, e) {
                return false;
            }
        }
    }
    true
}

fn mesh_aabb(mesh: &TriMesh) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let first = mesh.vertices().first()?.coords;
    Some(mesh.vertices().iter().fold((first, first), |(lo, hi), p| {
        (lo.inf(&p.coords), hi.sup(&p.coords))
    }))
}

/// Generalized winding number of the mesh around `p`: about 1 inside a closed
/// outward-oriented surface, about 0 outside.
fn winding_number(mesh: &TriMesh, p: &Point3<f64>) -> f64 {
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        let [a, b, c] = mesh.triangle(f).map(|v| v - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}

/// True when any gripper box at full opening intersects a mesh triangle or
/// sits wholly inside the enclosed volume.
pub fn check_penetration(gripper: &GripperModel, pose: &GraspPose, mesh: &TriMesh) -> bool {
    let Some((mesh_lo, mesh_hi)) = mesh_aabb(mesh) else {
        return false;
    };
    gripper_boxes(gripper, pose).iter().any(|b| {
        let (lo, hi) = b.world_aabb();
        if (0..3).any(|k| lo[k] > mesh_hi[k] || hi[k] < mesh_lo[k]) {
            return false;
        }
        (0..mesh.faces().len()).any(|f| box_triangle_intersect(b, &mesh.triangle(f)))
            || winding_number(mesh, &b.center).abs() >= 0.5
    })
}

/// Möller–Trumbore without culling. Returns the ray parameter of the hit.
fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

fn sweep_finger(
    mesh: &TriMesh,
    origins: &[Point3<f64>],
    dir: &Vector3<f64>,
    travel: f64,
    finger: Finger,
) -> Option<Contact> {
    // first hit per ray: (t, face)
    let hits: Vec<Option<(f64, usize)>> = origins
        .iter()
        .map(|origin| {
            let mut best: Option<(f64, usize)> = None;
            for f in 0..mesh.faces().len() {
                if mesh.face_area(f) < DEGENERATE_FACE_AREA {
                    continue;
                }
                let Some(t) = ray_triangle(origin, dir, &mesh.triangle(f)) else {
                    continue;
                };
                if (0.0..=travel).contains(&t) && best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, f));
                }
            }
            best
        })
        .collect();
    let (t_first, face) = hits
        .iter()
        .flatten()
        .copied()
        .fold(None, |acc: Option<(f64, usize)>, h| match acc {
            Some(a) if a.0 <= h.0 => Some(a),
            _ => Some(h),
        })?;
    let (sum, count) = origins
        .iter()
        .zip(&hits)
        .filter_map(|(o, h)| h.filter(|(t, _)| *t <= t_first + travel * CONTACT_BAND_FRACTION).map(|(t, _)| o + dir * t))
        .fold((Vector3::zeros(), 0usize), |(s, n), p| (s + p.coords, n + 1));
    let mut normal = mesh.face_cross(face).normalize();
    if normal.dot(dir) > 0.0 {
        normal = -normal;
    }
    Some(Contact {
        position: Point3::from(sum / count as f64),
        normal,
        finger,
    })
}

/// Moves both pads toward each other along the jaw axis from full opening.
/// Each pad casts a grid of rays over one opening width of travel. The
/// contact is the mean of the hits within [`CONTACT_BAND_FRACTION`] of the opening behind the first one,
/// with the normal of the first face hit.
pub fn close_fingers(gripper: &GripperModel, pose: &GraspPose, mesh: &TriMesh) -> ContactSet {
    let rot = frame(pose);
    let jaw = rot.column(0).into_owned();
    let half_w = gripper.finger_width() / 2.0;
    let half_l = gripper.finger_length / 2.0;
    let lerp = |a: f64, i: usize| -a + 2.0 * a * i as f64 / (PAD_RAYS - 1) as f64;
    let pad = |side: f64| -> Vec<Point3<f64>> {
        let mut origins = Vec::with_capacity(PAD_RAYS * PAD_RAYS);
        for i in 0..PAD_RAYS {
            for j in 0..PAD_RAYS {
                let local = Vector3::new(side * gripper.max_opening / 2.0, lerp(half_w, i), lerp(half_l, j));
                origins.push(pose.position + rot * local);
            }
        }
        origins
    };
    ContactSet {
        left: sweep_finger(mesh, &pad(-1.0), &jaw, gripper.max_opening, Finger::Left),
        right: sweep_finger(mesh, &pad(1.0), &(-jaw), gripper.max_opening, Finger::Right),
    }
}

/// Two-contact antipodal test: the segment between the contacts must lie in
/// both friction cones. Frictionless contacts never qualify.
pub fn force_closure(contacts: &ContactSet, mu: f64) -> bool {
    let Some((a, b)) = contacts.both() else {
        return false;
    };
    if !(mu > 0.0) {
        return false;
    }
    let half_angle = mu.atan();
    let within = |c: &Contact, other: &Contact| {
        let d = c.position - other.position;
        if d.norm() <= 1e-12 {
            return false;
        }
        let angle = c.normal.cross(&d).norm().atan2(c.normal.dot(&d));
        angle <= half_angle
    };
    within(a, b) && within(b, a)
}

/// ±y and ±z of the grasp frame, all perpendicular to the jaw axis.
pub fn slide_directions(pose: &GraspPose) -> [Vector3<f64>; 4] {
    let rot = frame(pose);
    let y = rot.column(1).into_owned();
    let z = rot.column(2).into_owned();
    [y, -y, z, -z]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlideResult {
    pub passed: bool,
    pub max_displacement: f64,
}

/// Friction from both pads, `2 μ F`, must carry `m (g + a)` in every direction.
pub fn slide_resistance(
    contacts: &ContactSet,
    mu: f64,
    squeeze_force: f64,
    mass: f64,
    directions: &[Vector3<f64>],
    config: &VerifyConfig,
) -> Result<SlideResult, VerifyError> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(VerifyError::Argument(format!("mass {mass} must be positive")));
    }
    let capacity = if contacts.both().is_some() { 2.0 * mu * squeeze_force } else { 0.0 };
    let load = mass * (config.gravity + config.test_acceleration);
    let holds = directions.iter().all(|_| capacity >= load);
    let max_displacement = if holds { 0.0 } else { SLIDE_FAIL_DISPLACEMENT };
    Ok(SlideResult {
        passed: max_displacement < config.displacement_threshold,
        max_displacement,
    })
}

fn failed(reason: FailureReason, max_displacement: f64) -> VerificationOutcome {
    VerificationOutcome {
        passed: false,
        failure_reason: reason,
        stable_frames: 0,
        max_displacement,
    }
}

/// Runs penetration, closing, force closure and slide checks in that order.
pub fn verify_grasp(
    mesh: &TriMesh,
    physical: &PhysicalProperties,
    grasp: &GraspPose,
    gripper: &GripperModel,
    config: &VerifyConfig,
) -> Result<VerificationOutcome, VerifyError> {
    grasp
        .orientation
        .validate("orientation")
        .map_err(|e| VerifyError::Argument(e.to_string()))?;
    gripper.validate().map_err(|e| VerifyError::Argument(e.to_string()))?;
    if !(physical.mass.is_finite() && physical.mass > 0.0) {
        return Err(VerifyError::Argument(format!("mass {} must be positive", physical.mass)));
    }
    let mu = config.mu.unwrap_or(physical.friction);
    let squeeze = config.squeeze_force.unwrap_or(gripper.squeeze_force);

    if check_penetration(gripper, grasp, mesh) {
        return Ok(failed(FailureReason::Penetration, 0.0));
    }
    let contacts = close_fingers(gripper, grasp, mesh);
    if contacts.is_empty() {
        return Ok(failed(FailureReason::NoContact, 0.0));
    }
    if !force_closure(&contacts, mu) {
        return Ok(failed(FailureReason::NotForceClosure, 0.0));
    }
    let slide = slide_resistance(&contacts, mu, squeeze, physical.mass, &slide_directions(grasp), config)?;
    if !slide.passed {
        return Ok(failed(FailureReason::SlideFailure, slide.max_displacement));
    }
    Ok(VerificationOutcome {
        passed: true,
        failure_reason: FailureReason::None,
        stable_frames: REQUIRED_STABLE_FRAMES,
        max_displacement: slide.max_displacement,
    })
}
