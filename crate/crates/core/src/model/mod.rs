//! Domain types shared by every pipeline stage, plus the on-disk manifest.
//!
//! Units are fixed globally: lengths in meters, masses in kilograms, forces in
//! newtons. Quaternions are stored as `(w, x, y, z)`.

mod manifest;

pub(crate) use manifest::write_atomic;
pub use manifest::{load_manifest, manifest_from_str, manifest_to_string, save_manifest, ManifestError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{Matrix3, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Tolerance for unit-length checks on normals, quaternions and rotation columns.
pub const UNIT_TOLERANCE: f64 = 1e-6;
/// Displacement below which a held object counts as stable.
pub const DEFAULT_DISPLACEMENT_THRESHOLD: f64 = 0.01;
/// Consecutive stable frames a passing grasp must report.
pub const REQUIRED_STABLE_FRAMES: u32 = 3;
/// Relative inflation of the OBB used when checking functional point positions.
pub const FUNCTIONAL_POINT_OBB_SLACK: f64 = 0.05;

/// A type invariant that does not hold, with the offending field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid `{field}`: {message}")]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }

    fn nested(self, prefix: &str) -> Self {
        Self {
            field: format!("{prefix}.{}", self.field),
            message: self.message,
        }
    }
}

type Validation = Result<(), ValidationError>;

fn check(cond: bool, field: &str, message: impl FnOnce() -> String) -> Validation {
    if cond {
        Ok(())
    } else {
        Err(ValidationError::new(field, message()))
    }
}

fn check_finite3(v: &[f64; 3], field: &str) -> Validation {
    check(v.iter().all(|c| c.is_finite()), field, || format!("non-finite component in {v:?}"))
}

fn check_point(p: &Point3<f64>, field: &str) -> Validation {
    check(p.iter().all(|c| c.is_finite()), field, || format!("non-finite component in {p}"))
}

fn check_unit_interval(value: f64, field: &str) -> Validation {
    check((0.0..=1.0).contains(&value), field, || format!("{value} outside [0, 1]"))
}

/// Triangle mesh. Construction enforces index bounds, finite coordinates and
/// non-repeating face corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTriMesh", into = "RawTriMesh")]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

#[derive(Serialize, Deserialize)]
struct RawTriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl TryFrom<RawTriMesh> for TriMesh {
    type Error = ValidationError;

    fn try_from(raw: RawTriMesh) -> Result<Self, Self::Error> {
        TriMesh::new(raw.vertices, raw.faces)
    }
}

impl From<TriMesh> for RawTriMesh {
    fn from(mesh: TriMesh) -> Self {
        RawTriMesh {
            vertices: mesh.vertices,
            faces: mesh.faces,
        }
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, ValidationError> {
        for (i, v) in vertices.iter().enumerate() {
            check_point(v, &format!("vertices[{i}]"))?;
        }
        for (i, f) in faces.iter().enumerate() {
            let field = format!("faces[{i}]");
            check(f.iter().all(|&idx| idx < vertices.len()), &field, || {
                format!("index out of range in {f:?} for {} vertices", vertices.len())
            })?;
            check(f[0] != f[1] && f[1] != f[2] && f[0] != f[2], &field, || {
                format!("repeated vertex in {f:?}")
            })?;
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal (length = 2 × area), following the winding order.
    pub fn face_cross(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Applies `f` to every vertex, keeping the connectivity.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Result<Self, ValidationError> {
        Self::new(self.vertices.iter().map(f).collect(), self.faces.clone())
    }

    /// Mesh consisting of the union of both inputs.
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        TriMesh { vertices, faces }
    }
}

/// Point samples with optional unit normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Result<Self, ValidationError> {
        for (i, p) in points.iter().enumerate() {
            check_point(p, &format!("points[{i}]"))?;
        }
        if let Some(normals) = &normals {
            check(normals.len() == points.len(), "normals", || {
                format!("{} normals for {} points", normals.len(), points.len())
            })?;
            for (i, n) in normals.iter().enumerate() {
                check((n.norm() - 1.0).abs() <= UNIT_TOLERANCE, &format!("normals[{i}]"), || {
                    format!("norm {} is not unit", n.norm())
                })?;
            }
        }
        Ok(Self { points, normals })
    }

    pub fn from_points(points: Vec<Point3<f64>>) -> Result<Self, ValidationError> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-cloud holding the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.points.len() as f64))
    }
}

/// Box with an orthonormal basis (columns) and half extents sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedBoundingBox {
    pub center: Point3<f64>,
    pub rotation: Matrix3<f64>,
    pub half_extents: [f64; 3],
}

impl OrientedBoundingBox {
    pub fn validate(&self) -> Validation {
        check_point(&self.center, "center")?;
        let gram = self.rotation.transpose() * self.rotation;
        check((gram - Matrix3::identity()).amax() <= UNIT_TOLERANCE, "rotation", || {
            "columns are not orthonormal".into()
        })?;
        check_finite3(&self.half_extents, "half_extents")?;
        let h = self.half_extents;
        check(h.iter().all(|&e| e >= 0.0), "half_extents", || format!("negative extent in {h:?}"))?;
        check(h[0] >= h[1] && h[1] >= h[2], "half_extents", || format!("{h:?} not sorted descending"))
    }

    /// Full side lengths, longest first.
    pub fn dims(&self) -> [f64; 3] {
        self.half_extents.map(|h| 2.0 * h)
    }

    pub fn longest_axis(&self) -> f64 {
        2.0 * self.half_extents[0]
    }

    pub fn volume(&self) -> f64 {
        self.dims().iter().product()
    }

    /// Coordinates of `p` in the box frame.
    pub fn local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.center)
    }

    /// Whether `p` lies inside the box grown by `relative` of each half extent plus `absolute`.
    pub fn contains_inflated(&self, p: &Point3<f64>, relative: f64, absolute: f64) -> bool {
        let local = self.local(p);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i] * (1.0 + relative) + absolute)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalProperties {
    pub obb_dims: [f64; 3],
    pub mass: f64,
    pub friction: f64,
    /// Box the dimensions were measured on, in the asset frame.
    pub obb: OrientedBoundingBox,
}

impl PhysicalProperties {
    pub fn validate(&self) -> Validation {
        check_finite3(&self.obb_dims, "obb_dims")?;
        check(self.obb_dims.iter().all(|&d| d > 0.0), "obb_dims", || {
            format!("non-positive dimension in {:?}", self.obb_dims)
        })?;
        check(self.mass.is_finite() && self.mass > 0.0, "mass", || format!("{} is not a positive mass", self.mass))?;
        check((0.0..=2.0).contains(&self.friction), "friction", || {
            format!("{} outside [0, 2]", self.friction)
        })?;
        self.obb.validate().map_err(|e| e.nested("obb"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticCaption {
    pub category: String,
    pub color: String,
    pub material: String,
    pub size: String,
    pub shape: String,
    pub function: String,
}

impl SemanticCaption {
    pub fn validate(&self) -> Validation {
        for (field, value) in [
            ("category", &self.category),
            ("color", &self.color),
            ("material", &self.material),
            ("size", &self.size),
            ("shape", &self.shape),
            ("function", &self.function),
        ] {
            check(!value.trim().is_empty(), field, || "empty".into())?;
        }
        Ok(())
    }

    /// Value of a caption attribute by name.
    pub fn attribute(&self, name: &str) -> Option<&str> {
        Some(match name {
            "category" => &self.category,
            "color" => &self.color,
            "material" => &self.material,
            "size" => &self.size,
            "shape" => &self.shape,
            "function" => &self.function,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalPoint {
    pub id: u32,
    pub position: Point3<f64>,
    pub function_label: String,
    pub confidence: f64,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraspType {
    ParallelJaw,
    Pinch,
    Power,
    ThreeFinger,
    Enveloping,
}

impl GraspType {
    pub const ALL: [GraspType; 5] = [
        GraspType::ParallelJaw,
        GraspType::Pinch,
        GraspType::Power,
        GraspType::ThreeFinger,
        GraspType::Enveloping,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraspType::ParallelJaw => "parallel-jaw",
            GraspType::Pinch => "pinch",
            GraspType::Power => "power",
            GraspType::ThreeFinger => "three-finger",
            GraspType::Enveloping => "enveloping",
        }
    }
}

impl fmt::Display for GraspType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPoint {
    pub id: u32,
    pub position: Point3<f64>,
    pub grasp_type: GraspType,
    pub use_scenario: String,
}

/// Quaternion stored as `[w, x, y, z]`. Not normalized on construction so that
/// malformed inputs can be reported instead of silently repaired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from([w, x, y, z]: [f64; 4]) -> Self {
        Quat { w, x, y, z }
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl From<UnitQuaternion<f64>> for Quat {
    fn from(q: UnitQuaternion<f64>) -> Self {
        Quat {
            w: q.w,
            x: q.i,
            y: q.j,
            z: q.k,
        }
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        [self.w, self.x, self.y, self.z].iter().all(|c| c.is_finite()) && (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn to_unit(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_quaternion(Quaternion::new(self.w, self.x, self.y, self.z))
    }

    pub fn validate(&self, field: &str) -> Validation {
        check(self.is_unit(), field, || format!("quaternion norm {} is not 1", self.norm()))
    }

    /// Rotation angle between two orientations in radians, in `[0, π]`.
    pub fn angle_to(&self, other: &Quat) -> f64 {
        let dot = (self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z)
            / (self.norm() * other.norm());
        2.0 * dot.abs().min(1.0).acos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Penetration,
    NoContact,
    NotForceClosure,
    SlideFailure,
    None,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::Penetration => "penetration",
            FailureReason::NoContact => "no_contact",
            FailureReason::NotForceClosure => "not_force_closure",
            FailureReason::SlideFailure => "slide_failure",
            FailureReason::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub passed: bool,
    pub failure_reason: FailureReason,
    pub stable_frames: u32,
    pub max_displacement: f64,
}

impl VerificationOutcome {
    pub fn validate(&self) -> Validation {
        check(self.passed == (self.failure_reason == FailureReason::None), "failure_reason", || {
            format!("passed = {} inconsistent with {:?}", self.passed, self.failure_reason)
        })?;
        check(self.max_displacement.is_finite() && self.max_displacement >= 0.0, "max_displacement", || {
            format!("{} is not a displacement", self.max_displacement)
        })?;
        if self.passed {
            check(self.stable_frames >= REQUIRED_STABLE_FRAMES, "stable_frames", || {
                format!("{} < {REQUIRED_STABLE_FRAMES}", self.stable_frames)
            })?;
            check(self.max_displacement < DEFAULT_DISPLACEMENT_THRESHOLD, "max_displacement", || {
                format!("{} not below {DEFAULT_DISPLACEMENT_THRESHOLD}", self.max_displacement)
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub position: Point3<f64>,
    pub orientation: Quat,
    pub confidence: f64,
    pub associated_functional_point: Option<u32>,
    pub associated_grasp_point: Option<u32>,
    pub verification: Option<VerificationOutcome>,
}

impl GraspPose {
    pub fn new(position: Point3<f64>, orientation: UnitQuaternion<f64>, confidence: f64) -> Self {
        GraspPose {
            position,
            orientation: orientation.into(),
            confidence,
            associated_functional_point: None,
            associated_grasp_point: None,
            verification: None,
        }
    }

    pub fn validate(&self) -> Validation {
        check_point(&self.position, "position")?;
        self.orientation.validate("orientation")?;
        check_unit_interval(self.confidence, "confidence")?;
        if let Some(v) = &self.verification {
            v.validate().map_err(|e| e.nested("verification"))?;
        }
        Ok(())
    }
}

/// Parallel-jaw gripper geometry. The grasp frame has x along the closing
/// (jaw) axis, z along the approach direction and its origin centered between
/// the finger pads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub max_opening: f64,
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub palm_depth: f64,
    pub squeeze_force: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        GripperModel {
            max_opening: 0.08,
            finger_length: 0.045,
            finger_thickness: 0.01,
            palm_depth: 0.02,
            squeeze_force: 20.0,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Validation {
        for (field, value) in [
            ("max_opening", self.max_opening),
            ("finger_length", self.finger_length),
            ("finger_thickness", self.finger_thickness),
            ("palm_depth", self.palm_depth),
            ("squeeze_force", self.squeeze_force),
        ] {
            check(value.is_finite() && value > 0.0, field, || format!("{value} is not positive"))?;
        }
        check(self.max_opening > 2.0 * self.finger_thickness, "max_opening", || {
            format!("{} not greater than twice the finger thickness", self.max_opening)
        })
    }

    /// Extent of the finger pads perpendicular to both the jaw and approach axes.
    pub fn finger_width(&self) -> f64 {
        2.0 * self.finger_thickness
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementAnnotation {
    pub placement_position: Point3<f64>,
    pub placement_orientation: Quat,
    pub collision_radius: f64,
}

impl PlacementAnnotation {
    pub fn validate(&self) -> Validation {
        check_point(&self.placement_position, "placement_position")?;
        self.placement_orientation.validate("placement_orientation")?;
        check(self.collision_radius.is_finite() && self.collision_radius > 0.0, "collision_radius", || {
            format!("{} is not positive", self.collision_radius)
        })
    }
}

/// Grasp counts at each filtering step for one asset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspCounts {
    pub raw_proposals: u64,
    pub after_proximity: u64,
    pub candidates: u64,
    pub verified: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceStage {
    pub stage: String,
    pub status: String,
    pub params_hash: String,
}

/// Deterministic record of how an asset was produced. Timestamps live in the
/// stage log beside the manifest so identical runs yield identical manifests.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub stages: Vec<ProvenanceStage>,
    pub grasp_counts: GraspCounts,
    pub scale_factor: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub asset_id: String,
    pub mesh_ref: String,
    pub physical: PhysicalProperties,
    pub caption: SemanticCaption,
    pub functional_points: Vec<FunctionalPoint>,
    pub grasp_points: Vec<GraspPoint>,
    pub verified_grasps: Vec<GraspPose>,
    pub placement: PlacementAnnotation,
    pub provenance: Provenance,
    /// Fields this version does not know about, kept for round-tripping.
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl AssetRecord {
    pub fn validate(&self) -> Validation {
        check(!self.asset_id.trim().is_empty(), "asset_id", || "empty".into())?;
        check(!self.mesh_ref.trim().is_empty(), "mesh_ref", || "empty".into())?;
        self.physical.validate().map_err(|e| e.nested("physical"))?;
        self.caption.validate().map_err(|e| e.nested("caption"))?;

        let mut functional_ids = BTreeSet::new();
        for (i, fp) in self.functional_points.iter().enumerate() {
            let field = format!("functional_points[{i}]");
            check(functional_ids.insert(fp.id), &field, || format!("duplicate id {}", fp.id))?;
            check_point(&fp.position, &format!("{field}.position"))?;
            check_unit_interval(fp.confidence, &format!("{field}.confidence"))?;
            check(
                self.physical.obb.contains_inflated(&fp.position, FUNCTIONAL_POINT_OBB_SLACK, 1e-9),
                &format!("{field}.position"),
                || format!("{} outside the inflated OBB", fp.position),
            )?;
        }
        let mut grasp_ids = BTreeSet::new();
        for (i, gp) in self.grasp_points.iter().enumerate() {
            let field = format!("grasp_points[{i}]");
            check(grasp_ids.insert(gp.id), &field, || format!("duplicate id {}", gp.id))?;
            check_point(&gp.position, &format!("{field}.position"))?;
        }
        for (i, g) in self.verified_grasps.iter().enumerate() {
            let field = format!("verified_grasps[{i}]");
            g.validate().map_err(|e| e.nested(&field))?;
            check(
                g.verification.as_ref().is_some_and(|v| v.passed),
                &format!("{field}.verification"),
                || "grasp is not verified".into(),
            )?;
            if let Some(id) = g.associated_functional_point {
                check(functional_ids.contains(&id), &format!("{field}.associated_functional_point"), || {
                    format!("unknown functional point {id}")
                })?;
            }
            if let Some(id) = g.associated_grasp_point {
                check(grasp_ids.contains(&id), &format!("{field}.associated_grasp_point"), || {
                    format!("unknown grasp point {id}")
                })?;
            }
        }
        self.placement.validate().map_err(|e| e.nested("placement"))?;

        let counts = self.provenance.grasp_counts;
        check(counts.verified <= counts.candidates, "provenance.grasp_counts", || {
            format!("verified {} exceeds candidates {}", counts.verified, counts.candidates)
        })?;
        check(
            counts.verified == self.verified_grasps.len() as u64,
            "provenance.grasp_counts.verified",
            || format!("{} recorded but {} verified grasps present", counts.verified, self.verified_grasps.len()),
        )
    }
}

/// Per-stage totals over a batch and the rates derived from them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineStats {
    pub ingested: u64,
    /// Assets that passed the quality gate.
    pub gated: u64,
    pub annotated: u64,
    pub errored: u64,
    pub raw_proposals: u64,
    pub after_proximity: u64,
    pub candidates: u64,
    pub verified: u64,
    pub stage_executions: u64,
    pub gate_pass_rate: Option<f64>,
    pub verification_rate: Option<f64>,
    pub avg_raw_proposals_per_object: Option<f64>,
    pub avg_after_proximity_per_object: Option<f64>,
    pub avg_candidates_per_object: Option<f64>,
    pub avg_verified_per_object: Option<f64>,
}

/// `numerator / denominator`, undefined when the denominator is zero.
pub fn ratio(numerator: u64, denominator: u64) -> Option<f64> {
    (denominator > 0).then(|| numerator as f64 / denominator as f64)
}

impl PipelineStats {
    /// Fills the derived rates from the counts.
    pub fn with_rates(mut self) -> Self {
        self.gate_pass_rate = ratio(self.gated, self.ingested);
        self.verification_rate = ratio(self.verified, self.candidates);
        self.avg_raw_proposals_per_object = ratio(self.raw_proposals, self.annotated);
        self.avg_after_proximity_per_object = ratio(self.after_proximity, self.annotated);
        self.avg_candidates_per_object = ratio(self.candidates, self.annotated);
        self.avg_verified_per_object = ratio(self.verified, self.annotated);
        self
    }

    pub fn validate(&self) -> Validation {
        check(self.verified <= self.candidates, "verified", || {
            format!("{} exceeds candidates {}", self.verified, self.candidates)
        })?;
        check(self.gated <= self.ingested, "gated", || format!("{} exceeds ingested {}", self.gated, self.ingested))?;
        check(*self == self.clone().with_rates(), "rates", || "rates do not match counts".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimesh_rejects_out_of_range_and_repeated_indices() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 2]]).is_ok());
        assert_eq!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).unwrap_err().field, "faces[0]");
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 1]]).is_err());
        let mut bad = v;
        bad[1].x = f64::NAN;
        assert_eq!(TriMesh::new(bad, vec![]).unwrap_err().field, "vertices[1]");
    }

    #[test]
    fn point_cloud_requires_unit_normals() {
        let p = vec![Point3::origin()];
        assert!(PointCloud::new(p.clone(), Some(vec![Vector3::z()])).is_ok());
        assert!(PointCloud::new(p.clone(), Some(vec![Vector3::new(0.0, 0.0, 1.1)])).is_err());
        assert!(PointCloud::new(p, Some(vec![])).is_err());
    }

    #[test]
    fn quaternion_order_is_wxyz() {
        let q: Quat = serde_json::from_str("[0.5, 0.5, 0.5, 0.5]").unwrap();
        assert!(q.is_unit());
        let q = Quat::from(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::PI));
        let json = serde_json::to_string(&q).unwrap();
        let arr: [f64; 4] = serde_json::from_str(&json).unwrap();
        assert!(arr[0].abs() < 1e-12 && (arr[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quaternion_angle() {
        let a = Quat::IDENTITY;
        let b = Quat::from(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.7));
        assert!((a.angle_to(&b) - 0.7).abs() < 1e-12);
        // q and -q are the same rotation
        let neg = Quat { w: -b.w, x: -b.x, y: -b.y, z: -b.z };
        assert!(b.angle_to(&neg).abs() < 1e-6);
    }

    #[test]
    fn outcome_invariants() {
        let ok = VerificationOutcome {
            passed: true,
            failure_reason: FailureReason::None,
            stable_frames: 3,
            max_displacement: 0.0,
        };
        assert!(ok.validate().is_ok());
        assert!(VerificationOutcome { stable_frames: 2, ..ok.clone() }.validate().is_err());
        assert!(VerificationOutcome { max_displacement: 0.01, ..ok.clone() }.validate().is_err());
        assert!(VerificationOutcome { failure_reason: FailureReason::Penetration, ..ok }.validate().is_err());
    }

    #[test]
    fn gripper_defaults_are_valid() {
        assert!(GripperModel::default().validate().is_ok());
        let narrow = GripperModel { max_opening: 0.02, ..GripperModel::default() };
        assert_eq!(narrow.validate().unwrap_err().field, "max_opening");
    }

    #[test]
    fn undefined_rates_for_empty_counts() {
        let stats = PipelineStats::default().with_rates();
        assert_eq!(stats.verification_rate, None);
        assert_eq!(stats.gate_pass_rate, None);
        let stats = PipelineStats { candidates: 100, verified: 76, ..Default::default() }.with_rates();
        assert_eq!(stats.verification_rate, Some(0.76));
    }
}
