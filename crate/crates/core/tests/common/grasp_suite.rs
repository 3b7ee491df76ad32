//! Grasp fixtures and property suites, shared by the grasp tests and the
//! acceptance run.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mock_client, pose_at, random_rotation};
use twinkit::clients::{AnnotationClient, AssetContext};
use twinkit::geometry::{mesh_obb, primitives, surface_sample};
use twinkit::grasp::{
    check_penetration, close_fingers, force_closure, slide_directions, slide_resistance, verify_grasp, VerifyConfig,
};
use twinkit::model::{FailureReason, GraspPose, GripperModel, PhysicalProperties, TriMesh};

pub type Check = Result<String, String>;

pub const MASS: f64 = 0.2;
pub const MU: f64 = 0.5;

pub fn physical(mesh: &TriMesh, mass: f64, friction: f64) -> PhysicalProperties {
    let obb = mesh_obb(mesh).unwrap();
    PhysicalProperties {
        obb_dims: obb.dims(),
        mass,
        friction,
        obb,
    }
}

pub fn mock_proposals(mesh: &TriMesh, gripper: &GripperModel, seed: u64) -> Vec<GraspPose> {
    let cloud = surface_sample(mesh, 20_000, seed).unwrap();
    mock_client()
        .propose_grasps(AssetContext { asset_id: "fixture" }, &cloud, gripper, 200, seed)
        .unwrap()
}

pub fn reasons(mesh: &TriMesh, grasps: &[GraspPose], cfg: &VerifyConfig) -> Vec<FailureReason> {
    let g = GripperModel::default();
    let phys = physical(mesh, MASS, MU);
    grasps
        .iter()
        .map(|p| verify_grasp(mesh, &phys, p, &g, cfg).unwrap().failure_reason)
        .collect()
}

fn cube() -> TriMesh {
    primitives::cuboid(0.06, 0.06, 0.06)
}

/// 0.06 m box with the default 0.08 m gripper.
pub fn box_fixture() -> Check {
    let proposals = mock_proposals(&cube(), &GripperModel::default(), 1);
    let passed = reasons(&cube(), &proposals, &VerifyConfig::default())
        .iter()
        .filter(|r| **r == FailureReason::None)
        .count();
    let msg = format!("{passed}/{} verified", proposals.len());
    if passed >= 1 { Ok(msg) } else { Err(msg) }
}

/// 0.12 m sphere: mock proposals plus 100 random poses, none verify.
pub fn sphere_fixture() -> Check {
    let sphere = primitives::uv_sphere(0.06, 32, 16);
    let mut grasps = mock_proposals(&sphere, &GripperModel::default(), 2);
    let proposed = grasps.len();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let dir = random_rotation(&mut rng) * Vector3::z();
        let p = Point3::from(dir * rng.gen_range(0.0..0.12));
        grasps.push(GraspPose::new(p, random_rotation(&mut rng), 1.0));
    }
    let passed = reasons(&sphere, &grasps, &VerifyConfig::default())
        .iter()
        .filter(|r| **r == FailureReason::None)
        .count();
    let msg = format!("{passed}/{} verified ({proposed} mock)", grasps.len());
    if passed == 0 { Ok(msg) } else { Err(msg) }
}

/// Grasps that pass on the box at μ = 0.5 all fail force closure at μ = 0.
pub fn frictionless_fixture() -> Check {
    let proposals = mock_proposals(&cube(), &GripperModel::default(), 3);
    let good: Vec<GraspPose> = proposals
        .iter()
        .zip(reasons(&cube(), &proposals, &VerifyConfig::default()))
        .filter(|(_, r)| *r == FailureReason::None)
        .map(|(g, _)| g.clone())
        .collect();
    let cfg = VerifyConfig { mu: Some(0.0), ..VerifyConfig::default() };
    let nfc = reasons(&cube(), &good, &cfg).iter().filter(|r| **r == FailureReason::NotForceClosure).count();
    let msg = format!("{nfc}/{} not_force_closure", good.len());
    if !good.is_empty() && nfc == good.len() { Ok(msg) } else { Err(msg) }
}

/// Jaw across the vertical face and the 45° slope of a wedge.
pub fn wedge_fixture() -> Check {
    let wedge = primitives::wedge(0.06, 0.06);
    let gripper = GripperModel::default();
    let pose = pose_at(Point3::new(0.0, -0.01, 0.02), Vector3::x(), Vector3::y());
    if check_penetration(&gripper, &pose, &wedge) {
        return Err("fixture pose penetrates".into());
    }
    let contacts = close_fingers(&gripper, &pose, &wedge);
    let Some((l, r)) = contacts.both() else { return Err("pads do not both touch".into()) };
    let between = (-l.normal.dot(&r.normal)).clamp(-1.0, 1.0).acos().to_degrees();
    // analytic cone check: the inward line between the contacts must sit within
    // atan μ of each inward normal
    let d = r.position - l.position;
    let off = |line: Vector3<f64>, inward: Vector3<f64>| line.angle(&inward).to_degrees();
    let (al, ar) = (off(d, -l.normal), off(-d, -r.normal));
    let cone = MU.atan().to_degrees();
    let analytic = al <= cone && ar <= cone;
    let got = force_closure(&contacts, MU);
    let msg = format!("normals {between:.1}° apart, line {al:.1}°/{ar:.1}° off normals, cone {cone:.1}°, force_closure {got}");
    if !got && !analytic && (between - 45.0).abs() < 1e-9 { Ok(msg) } else { Err(msg) }
}

pub struct Case {
    pub mesh: usize,
    pub pose: GraspPose,
}

pub fn meshes() -> &'static [TriMesh] {
    static MESHES: OnceLock<Vec<TriMesh>> = OnceLock::new();
    MESHES.get_or_init(|| {
        vec![
            primitives::cuboid(0.06, 0.06, 0.06),
            primitives::cuboid(0.04, 0.07, 0.12),
            primitives::cylinder(0.025, 0.1, 32),
            primitives::uv_sphere(0.03, 24, 12),
            primitives::wedge(0.06, 0.06),
        ]
    })
}

/// 200 grasps: mock proposals, jittered proposals and random poses.
pub fn cases() -> &'static [Case] {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    CASES.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let gripper = GripperModel::default();
        let mut cases = Vec::new();
        for (m, mesh) in meshes().iter().enumerate() {
            let proposals = mock_proposals(mesh, &gripper, m as u64);
            for i in 0..40 {
                let pose = match (i % 4, proposals.get(i)) {
                    (0 | 1, Some(g)) => g.clone(),
                    (2, Some(g)) => {
                        let mut j = g.clone();
                        j.position +=
                            Vector3::new(rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01), rng.gen_range(-0.01..0.01));
                        let tilt = UnitQuaternion::from_scaled_axis(Vector3::new(
                            rng.gen_range(-0.3..0.3),
                            rng.gen_range(-0.3..0.3),
                            rng.gen_range(-0.3..0.3),
                        ));
                        j.orientation = (tilt * j.orientation.to_unit()).into();
                        j
                    }
                    _ => {
                        let p = Point3::new(rng.gen_range(-0.08..0.08), rng.gen_range(-0.08..0.08), rng.gen_range(-0.08..0.08));
                        GraspPose::new(p, random_rotation(&mut rng), 1.0)
                    }
                };
                cases.push(Case { mesh: m, pose });
            }
        }
        cases
    })
}

/// The reported reason is the first failing check, in the documented order.
pub fn ordering() -> Check {
    let gripper = GripperModel::default();
    let cfg = VerifyConfig::default();
    let mut seen = BTreeSet::new();
    for (i, c) in cases().iter().enumerate() {
        let mesh = &meshes()[c.mesh];
        let out = verify_grasp(mesh, &physical(mesh, MASS, MU), &c.pose, &gripper, &cfg).unwrap();
        out.validate().map_err(|e| format!("case {i}: {e}"))?;
        let expected = if check_penetration(&gripper, &c.pose, mesh) {
            FailureReason::Penetration
        } else {
            let contacts = close_fingers(&gripper, &c.pose, mesh);
            let slides = || {
                slide_resistance(&contacts, MU, gripper.squeeze_force, MASS, &slide_directions(&c.pose), &cfg)
                    .unwrap()
                    .passed
            };
            if contacts.is_empty() {
                FailureReason::NoContact
            } else if !force_closure(&contacts, MU) {
                FailureReason::NotForceClosure
            } else if !slides() {
                FailureReason::SlideFailure
            } else {
                FailureReason::None
            }
        };
        if out.failure_reason != expected {
            return Err(format!("case {i}: {:?} reported, {expected:?} expected", out.failure_reason));
        }
        seen.insert(expected);
    }
    if !seen.contains(&FailureReason::None) || seen.len() < 3 {
        return Err(format!("sample too narrow: {seen:?}"));
    }
    Ok(format!("{} grasps, outcomes {seen:?}", cases().len()))
}

/// Raising μ never turns a pass into a failure.
pub fn mu_monotone() -> Check {
    let gripper = GripperModel::default();
    let mus = [0.0, 0.1, 0.2, 0.35, 0.5, 0.8, 1.2, 2.0];
    for (i, c) in cases().iter().enumerate() {
        let mesh = &meshes()[c.mesh];
        let phys = physical(mesh, MASS, MU);
        let passed: Vec<bool> = mus
            .iter()
            .map(|&mu| {
                let cfg = VerifyConfig { mu: Some(mu), ..VerifyConfig::default() };
                verify_grasp(mesh, &phys, &c.pose, &gripper, &cfg).unwrap().passed
            })
            .collect();
        if !passed.windows(2).all(|w| !w[0] || w[1]) {
            return Err(format!("case {i}: {passed:?} over μ {mus:?}"));
        }
    }
    Ok(format!("{} grasps × {} μ values", cases().len(), mus.len()))
}

/// Scaling mesh, pose and gripper together leaves the outcome unchanged.
pub fn scale_invariant() -> Check {
    let gripper = GripperModel::default();
    let cfg = VerifyConfig::default();
    let scales = [0.5, 2.0, 4.0];
    for s in scales {
        let scaled = GripperModel {
            max_opening: gripper.max_opening * s,
            finger_length: gripper.finger_length * s,
            finger_thickness: gripper.finger_thickness * s,
            palm_depth: gripper.palm_depth * s,
            squeeze_force: gripper.squeeze_force,
        };
        for (i, c) in cases().iter().enumerate() {
            let mesh = &meshes()[c.mesh];
            let big = mesh.map_vertices(|p| Point3::from(p.coords * s)).unwrap();
            let mut pose = c.pose.clone();
            pose.position = Point3::from(pose.position.coords * s);
            let a = verify_grasp(mesh, &physical(mesh, MASS, MU), &c.pose, &gripper, &cfg).unwrap();
            let b = verify_grasp(&big, &physical(&big, MASS, MU), &pose, &scaled, &cfg).unwrap();
            if a.failure_reason != b.failure_reason {
                return Err(format!("case {i} at scale {s}: {:?} vs {:?}", a.failure_reason, b.failure_reason));
            }
        }
    }
    Ok(format!("{} grasps × scales {scales:?}", cases().len()))
}
