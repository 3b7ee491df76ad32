#![allow(dead_code)]

//! Independent oracles, generators and pinned tolerances shared by the
//! integration tests. Nothing here calls the library routine it checks.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Point2, Point3, Rotation3, UnitQuaternion, Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use twinkit::clients::{FixtureTable, MockClient, MockConfig};
use twinkit::layout::{sample_layout, LayoutItem, SceneLayout, Table};
use twinkit::model::*;
use twinkit::vqa::{Fact, VqaCategory, VqaPair};

pub mod grasp_suite;

pub mod tol {
    /// Surface sampling: allowed share of the large triangle.
    pub const AREA_SHARE: (f64, f64) = (0.73, 0.77);
    /// Verification rate arithmetic, in percentage points.
    pub const RATE_PP: f64 = 0.01;
    /// Stats recomputed from counts.
    pub const STATS_ABS: f64 = 1e-9;
    /// Geometric quantities recomputed by the VQA oracle.
    pub const VQA_ABS: f64 = 1e-9;
    /// A blocker within this distance of tangency is ambiguous in floating point.
    pub const TANGENCY: f64 = 1e-9;
    /// Review accuracy compared at one decimal.
    pub const PERCENT_DECIMALS: usize = 1;
    pub const FPS_BUDGET_S: f64 = 1.0;
    pub const LAYOUT_BUDGET_S: f64 = 10.0;
}

pub fn mock_client() -> MockClient {
    MockClient {
        fixtures: FixtureTable::default(),
        config: MockConfig::default(),
    }
}

// ---------- farthest point sampling ----------

/// Brute-force greedy: min distances recomputed from scratch every round.
pub fn fps_oracle(points: &[Point3<f64>], k: usize, seed: usize) -> Vec<usize> {
    generic_greedy(points.len(), k, seed, |a, b| (points[a] - points[b]).norm())
}

fn generic_greedy(n: usize, k: usize, seed: usize, d: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut chosen = vec![seed];
    while chosen.len() < k.min(n) {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            let m = chosen.iter().map(|&c| d(c, i)).fold(f64::INFINITY, f64::min);
            if m > best_d {
                best = i;
                best_d = m;
            }
        }
        chosen.push(best);
    }
    chosen
}

/// Greedy over ‖Δp‖ + w·θ seeded at the most confident pose.
pub fn fps7_oracle(poses: &[GraspPose], k: usize, w: f64) -> Vec<usize> {
    let mut seed = 0;
    for (i, g) in poses.iter().enumerate() {
        if g.confidence > poses[seed].confidence {
            seed = i;
        }
    }
    let q = |g: &GraspPose| [g.orientation.w, g.orientation.x, g.orientation.y, g.orientation.z];
    generic_greedy(poses.len(), k, seed, |a, b| {
        let (qa, qb) = (q(&poses[a]), q(&poses[b]));
        let dot: f64 = qa.iter().zip(&qb).map(|(x, y)| x * y).sum();
        let na = qa.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = qb.iter().map(|x| x * x).sum::<f64>().sqrt();
        let theta = 2.0 * (dot.abs() / (na * nb)).min(1.0).acos();
        (poses[a].position - poses[b].position).norm() + w * theta
    })
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(
        rng.gen_range(-3.14..3.14),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-3.14..3.14),
    )
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> GraspPose {
    let p = Point3::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
    // coarse confidences so ties with the seed rule occur
    let c = rng.gen_range(0..5) as f64 / 4.0;
    GraspPose::new(p, random_rotation(rng), c)
}

// ---------- grasp poses ----------

/// Pose whose jaw axis is `x` and approach direction is `z`.
pub fn pose_at(p: Point3<f64>, x: Vector3<f64>, z: Vector3<f64>) -> GraspPose {
    let x = x.normalize();
    let z = z.normalize();
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    GraspPose::new(p, UnitQuaternion::from_rotation_matrix(&rot), 1.0)
}

pub fn top_down(p: Point3<f64>) -> GraspPose {
    pose_at(p, Vector3::x(), -Vector3::z())
}

// ---------- asset records ----------

pub const CATEGORIES: [&str; 4] = ["mug", "bowl", "bottle", "box"];
pub const COLORS: [&str; 3] = ["red", "blue", "white"];
pub const MATERIALS: [&str; 3] = ["ceramic", "plastic", "metal"];
pub const SHAPES: [&str; 3] = ["cylindrical", "round", "boxy"];
const WORDS: [&str; 6] = ["handle", "rim", "spout \"lip\"", "base", "lid\tedge", "grip ü"];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty vocabulary")
}

/// Magnitudes spread over many orders to stress float round-tripping.
fn wide(rng: &mut ChaCha8Rng) -> f64 {
    let mag = 10f64.powi(rng.gen_range(-12..4));
    rng.gen_range(-1.0..1.0) * mag
}

pub fn random_record(rng: &mut ChaCha8Rng, id: &str) -> AssetRecord {
    let mut h: [f64; 3] = [rng.gen_range(0.01..0.3), rng.gen_range(0.01..0.3), rng.gen_range(0.01..0.3)];
    h.sort_by(|a, b| b.total_cmp(a));
    let rotation = random_rotation(rng).to_rotation_matrix().into_inner();
    let center = Point3::new(wide(rng), wide(rng), wide(rng));
    let obb = OrientedBoundingBox {
        center,
        rotation,
        half_extents: h,
    };
    let inside = |rng: &mut ChaCha8Rng| {
        let u = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        center + rotation * Vector3::new(u.x * h[0], u.y * h[1], u.z * h[2])
    };
    let nf = rng.gen_range(0..4);
    let functional_points: Vec<FunctionalPoint> = (0..nf)
        .map(|i| FunctionalPoint {
            id: i * 3 + rng.gen_range(0..3),
            position: inside(rng),
            function_label: pick(rng, &WORDS).into(),
            confidence: rng.gen_range(0.0..=1.0),
            rationale: pick(rng, &WORDS).repeat(rng.gen_range(0..3)),
        })
        .collect();
    let ng = rng.gen_range(0..4);
    let grasp_points: Vec<GraspPoint> = (0..ng)
        .map(|i| GraspPoint {
            id: 10 - i,
            position: inside(rng),
            grasp_type: *GraspType::ALL.choose(rng).unwrap(),
            use_scenario: pick(rng, &WORDS).into(),
        })
        .collect();
    let nv = rng.gen_range(0..5);
    let verified_grasps: Vec<GraspPose> = (0..nv)
        .map(|_| {
            let mut g = GraspPose::new(inside(rng), random_rotation(rng), rng.gen_range(0.0..=1.0));
            g.associated_functional_point = functional_points.choose(rng).map(|f| f.id).filter(|_| rng.gen());
            g.associated_grasp_point = grasp_points.choose(rng).map(|f| f.id).filter(|_| rng.gen());
            g.verification = Some(VerificationOutcome {
                passed: true,
                failure_reason: FailureReason::None,
                stable_frames: rng.gen_range(3..10),
                max_displacement: rng.gen_range(0.0..0.01),
            });
            g
        })
        .collect();
    let verified = verified_grasps.len() as u64;
    let candidates = verified + rng.gen_range(0..50);
    let after_proximity = candidates + rng.gen_range(0..200);
    let mut extra = BTreeMap::new();
    if rng.gen() {
        extra.insert("x_reviewer_note".into(), serde_json::json!({"tags": ["a", "b"], "score": wide(rng)}));
    }
    let record = AssetRecord {
        asset_id: id.into(),
        mesh_ref: format!("{id}/mesh.obj"),
        physical: PhysicalProperties {
            obb_dims: obb.dims(),
            mass: rng.gen_range(0.001..5.0),
            friction: rng.gen_range(0.0..=2.0),
            obb,
        },
        caption: SemanticCaption {
            category: pick(rng, &CATEGORIES).into(),
            color: pick(rng, &COLORS).into(),
            material: pick(rng, &MATERIALS).into(),
            size: pick(rng, &["small", "medium", "large"]).into(),
            shape: pick(rng, &SHAPES).into(),
            function: pick(rng, &WORDS).into(),
        },
        functional_points,
        grasp_points,
        verified_grasps,
        placement: PlacementAnnotation {
            placement_position: Point3::new(wide(rng), wide(rng), wide(rng)),
            placement_orientation: if rng.gen() { Quat::IDENTITY } else { random_rotation(rng).into() },
            collision_radius: rng.gen_range(0.03..0.12),
        },
        provenance: Provenance {
            stages: (0..rng.gen_range(0..4))
                .map(|i| ProvenanceStage {
                    stage: format!("stage_{i}"),
                    status: "ok".into(),
                    params_hash: format!("{:016x}", rng.gen::<u64>()),
                })
                .collect(),
            grasp_counts: GraspCounts {
                raw_proposals: after_proximity + rng.gen_range(0..500),
                after_proximity,
                candidates,
                verified,
            },
            scale_factor: rng.gen_range(0.001..100.0),
            notes: (0..rng.gen_range(0..2)).map(|_| pick(rng, &WORDS).into()).collect(),
        },
        extra,
    };
    record.validate().expect("generator yields valid records");
    record
}

// ---------- stats ----------

/// Totals and rates read straight from stage logs and manifests as raw JSON.
#[derive(Debug, Default)]
pub struct Recount {
    pub ingested: u64,
    pub gated: u64,
    pub annotated: u64,
    pub candidates: u64,
    pub verified: u64,
    pub raw: u64,
}

pub fn recount(store: &Path) -> Recount {
    let mut r = Recount::default();
    for entry in std::fs::read_dir(store.join("assets")).expect("assets dir") {
        let dir = entry.unwrap().path();
        if !dir.is_dir() {
            continue;
        }
        r.ingested += 1;
        if let Ok(text) = std::fs::read_to_string(dir.join("stage_log.json")) {
            let log: Value = serde_json::from_str(&text).unwrap();
            let gate_ok = log["entries"]
                .as_array()
                .unwrap()
                .iter()
                .any(|e| e["stage"] == "quality_gate" && e["status"] == "ok");
            r.gated += gate_ok as u64;
        }
        if let Ok(text) = std::fs::read_to_string(dir.join("manifest.json")) {
            let m: Value = serde_json::from_str(&text).unwrap();
            let c = &m["provenance"]["grasp_counts"];
            r.annotated += 1;
            r.candidates += c["candidates"].as_u64().unwrap();
            r.verified += c["verified"].as_u64().unwrap();
            r.raw += c["raw_proposals"].as_u64().unwrap();
            assert_eq!(m["verified_grasps"].as_array().unwrap().len() as u64, c["verified"].as_u64().unwrap());
        }
    }
    r
}

// ---------- VQA ----------

struct Obj<'a> {
    id: &'a str,
    center: Point2<f64>,
    radius: f64,
    yaw: f64,
    record: &'a AssetRecord,
}

fn caption_attr<'a>(c: &'a SemanticCaption, k: &str) -> &'a str {
    match k {
        "category" => &c.category,
        "color" => &c.color,
        "material" => &c.material,
        "shape" => &c.shape,
        "size" => &c.size,
        "function" => &c.function,
        other => panic!("unknown attribute {other}"),
    }
}

/// Table-plane position of an asset-frame point once the asset rests with its
/// rest point at `center`, turned by `yaw`.
fn world_xy(o: &Obj<'_>, p: &Point3<f64>) -> Point2<f64> {
    let upright = o.record.placement.placement_orientation.to_unit();
    let local = upright * (p - o.record.placement.placement_position);
    let (s, c) = o.yaw.sin_cos();
    Point2::new(o.center.x + c * local.x - s * local.y, o.center.y + s * local.x + c * local.y)
}

/// Minimum of |a + t(b − a) − c| over t in [0, 1], from the quadratic in t.
fn segment_clearance(c: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let d: Vector2<f64> = b - a;
    let f: Vector2<f64> = a - c;
    let qa = d.dot(&d);
    let qb = 2.0 * d.dot(&f);
    let qc = f.dot(&f);
    let mut best = qc.min(qa + qb + qc);
    if qa > 0.0 {
        let t = -qb / (2.0 * qa);
        if (0.0..=1.0).contains(&t) {
            best = best.min(qa * t * t + qb * t + qc);
        }
    }
    best.max(0.0).sqrt()
}

/// Shortest of category / color+category / color+material+category that
/// matches one object only, rendered as "the <color> <material> <category>".
fn oracle_name(objs: &[Obj<'_>], i: usize) -> String {
    let c = &objs[i].record.caption;
    let levels: [&[&str]; 3] = [&["category"], &["color", "category"], &["color", "material", "category"]];
    for keys in levels {
        let unique = objs
            .iter()
            .filter(|o| keys.iter().all(|k| caption_attr(&o.record.caption, k) == caption_attr(c, k)))
            .count()
            == 1;
        if unique {
            let words: Vec<&str> = ["color", "material", "category"]
                .iter()
                .filter(|k| keys.contains(k))
                .map(|k| caption_attr(c, k))
                .collect();
            return format!("the {}", words.join(" "));
        }
    }
    objs[i].id.to_string()
}

/// Outcome of re-checking one pair; `ambiguous` counts near-tangent cases
/// whose truth floating point cannot settle.
#[derive(Debug, Default)]
pub struct VqaCheck {
    pub checked: usize,
    pub failures: Vec<String>,
    pub ambiguous: usize,
}

pub fn check_pair(pair: &VqaPair, layout: &SceneLayout, records: &[AssetRecord], out: &mut VqaCheck) {
    out.checked += 1;
    let objs: Vec<Obj<'_>> = layout
        .placements
        .iter()
        .map(|p| {
            let record = records.iter().find(|r| r.asset_id == p.asset_id).expect("record");
            Obj {
                id: &p.asset_id,
                center: Point2::new(p.position[0], p.position[1]),
                radius: record.placement.collision_radius,
                yaw: p.yaw,
                record,
            }
        })
        .collect();
    let find = |id: &str| objs.iter().position(|o| o.id == id);
    let mut fail = |msg: String| out.failures.push(format!("{}: {}: {msg}", pair.scene_id, pair.question));
    if pair.scene_id != layout.scene_id {
        fail("scene id mismatch".into());
    }
    if pair.grounding.facts.is_empty() {
        fail("no facts".into());
    }
    for id in &pair.grounding.asset_ids {
        if find(id).is_none() {
            fail(format!("grounded on absent {id}"));
        }
    }
    let mut ambiguous = 0;
    let expected_category = |f: &Fact| match f {
        Fact::AttributeCount { .. } => Some(VqaCategory::Detection),
        Fact::GraspType { .. } => Some(VqaCategory::LanguageGrounding),
        Fact::LineOfSight { .. } => Some(VqaCategory::FunctionalPlanning),
        Fact::Clearance { .. } => Some(VqaCategory::SceneUnderstanding),
        Fact::Sweep { .. } => Some(VqaCategory::TaskPlanning),
        Fact::Referent { .. } => None,
    };
    let primary: Vec<&Fact> = pair.grounding.facts.iter().filter(|f| expected_category(f).is_some()).collect();
    if primary.len() != 1 || expected_category(primary[0]) != Some(pair.category) {
        fail(format!("category {:?} not backed by exactly one matching fact", pair.category));
    }
    for fact in &pair.grounding.facts {
        match fact {
            Fact::AttributeCount { attribute, value, count } => {
                let matching: Vec<&str> = objs
                    .iter()
                    .filter(|o| caption_attr(&o.record.caption, attribute) == value)
                    .map(|o| o.id)
                    .collect();
                if matching.len() != *count || pair.answer != matching.len().to_string() {
                    fail(format!("count {count} / answer {} but {} objects match", pair.answer, matching.len()));
                }
                if !pair.question.contains(value.as_str()) {
                    fail("question omits the value".into());
                }
            }
            Fact::Referent { asset_id, attributes } => {
                let matching: Vec<&str> = objs
                    .iter()
                    .filter(|o| attributes.iter().all(|(k, v)| caption_attr(&o.record.caption, k) == v))
                    .map(|o| o.id)
                    .collect();
                if matching != [asset_id.as_str()] {
                    fail(format!("referent {attributes:?} matches {matching:?}, not only {asset_id}"));
                }
                let words: Vec<&str> = ["color", "material", "category"]
                    .iter()
                    .filter_map(|k| attributes.get(*k).map(String::as_str))
                    .collect();
                let phrase = format!("the {}", words.join(" "));
                if !pair.question.contains(&phrase) {
                    fail(format!("question does not name `{phrase}`"));
                }
            }
            Fact::GraspType { asset_id, grasp_point, grasp_type } => {
                let Some(i) = find(asset_id) else { continue };
                match objs[i].record.grasp_points.iter().min_by_key(|g| g.id) {
                    Some(g) if g.id == *grasp_point && g.grasp_type == *grasp_type => {}
                    other => fail(format!("grasp fact disagrees with record: {other:?}")),
                }
                if pair.answer != grasp_type.as_str() {
                    fail("answer is not the grasp type".into());
                }
            }
            Fact::LineOfSight { asset_id, functional_point, label, target, viewer, blocked_by } => {
                let Some(i) = find(asset_id) else { continue };
                let Some(fp) = objs[i].record.functional_points.iter().find(|f| f.id == *functional_point) else {
                    fail("unknown functional point".into());
                    continue;
                };
                if &fp.function_label != label {
                    fail("label mismatch".into());
                }
                let t = world_xy(&objs[i], &fp.position);
                if (t.x - target[0]).abs() > tol::VQA_ABS || (t.y - target[1]).abs() > tol::VQA_ABS {
                    fail(format!("target {target:?} but oracle puts the point at {t}"));
                }
                let v = Point2::new(layout.table.width / 2.0, -1.0);
                if (v.x - viewer[0]).abs() > tol::VQA_ABS || (v.y - viewer[1]).abs() > tol::VQA_ABS {
                    fail("viewer position".into());
                }
                let mut expected = Vec::new();
                for (j, o) in objs.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let d = segment_clearance(&o.center, &v, &t);
                    if (d - o.radius).abs() < tol::TANGENCY {
                        ambiguous += 1;
                        if blocked_by.iter().any(|b| b == o.id) {
                            expected.push(o.id.to_string());
                        }
                    } else if d < o.radius {
                        expected.push(o.id.to_string());
                    }
                }
                if &expected != blocked_by {
                    fail(format!("blockers {blocked_by:?}, oracle {expected:?}"));
                }
                let want = if blocked_by.is_empty() {
                    "yes".to_string()
                } else {
                    let names: Vec<String> =
                        blocked_by.iter().filter_map(|b| find(b)).map(|j| oracle_name(&objs, j)).collect();
                    format!("no, blocked by {}", names.join(", "))
                };
                if pair.answer != want {
                    fail(format!("answer `{}`, oracle `{want}`", pair.answer));
                }
            }
            Fact::Clearance { asset_id, neighbor, gap } => {
                let Some(i) = find(asset_id) else { continue };
                let gaps: Vec<(usize, f64)> = objs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(j, o)| (j, (o.center - objs[i].center).norm() - o.radius - objs[i].radius))
                    .collect();
                let min = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
                if (min - gap).abs() > tol::VQA_ABS {
                    fail(format!("gap {gap} but oracle minimum {min}"));
                }
                match find(neighbor) {
                    Some(j) if gaps.iter().any(|&(k, g)| k == j && (g - min).abs() <= tol::VQA_ABS) => {}
                    _ => fail(format!("{neighbor} is not a nearest neighbor")),
                }
                if *gap < -tol::VQA_ABS {
                    fail("negative gap on a valid layout".into());
                }
                let want = find(neighbor).map(|j| format!("{min:.3} m to {}", oracle_name(&objs, j)));
                if want.as_deref() != Some(pair.answer.as_str()) {
                    fail(format!("answer `{}`, oracle {want:?}", pair.answer));
                }
            }
            Fact::Sweep { asset_id, moves, collides_with } => {
                let Some(i) = find(asset_id) else { continue };
                if moves.len() != 2 || moves[0][1] != 0.0 || moves[1][0] != 0.0 {
                    fail("moves are not x then y".into());
                }
                for m in moves.iter().flatten() {
                    let cm = m * 100.0;
                    if m.abs() > 0.2 + 1e-12 || (cm - cm.round()).abs() > 1e-9 {
                        fail(format!("move {m} not whole centimetres within 0.2 m"));
                    }
                }
                let mut path = vec![objs[i].center];
                for m in moves {
                    let last = *path.last().unwrap();
                    path.push(Point2::new(last.x + m[0], last.y + m[1]));
                }
                let mut expected = Vec::new();
                for (j, o) in objs.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let reach = o.radius + objs[i].radius;
                    let d = path
                        .windows(2)
                        .map(|s| segment_clearance(&o.center, &s[0], &s[1]))
                        .fold(f64::INFINITY, f64::min);
                    if (d - reach).abs() < tol::TANGENCY {
                        ambiguous += 1;
                        if collides_with.iter().any(|c| c == o.id) {
                            expected.push(o.id.to_string());
                        }
                    } else if d < reach {
                        expected.push(o.id.to_string());
                    }
                }
                if &expected != collides_with {
                    fail(format!("collisions {collides_with:?}, oracle {expected:?}"));
                }
                let yes = !expected.is_empty();
                if pair.answer != if yes { "yes" } else { "no" } {
                    fail(format!("answer `{}` but collision = {yes}", pair.answer));
                }
            }
        }
    }
    out.ambiguous += ambiguous;
}

/// A pool of records with overlapping captions, so naming needs widening.
pub fn vqa_pool(rng: &mut ChaCha8Rng, n: usize) -> Vec<AssetRecord> {
    (0..n)
        .map(|i| {
            let mut r = random_record(rng, &format!("obj_{i:03}"));
            r.placement.placement_position = Point3::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05), 0.0);
            r.caption.category = pick(rng, &CATEGORIES[..2]).into();
            r
        })
        .collect()
}

/// 100 feasible scenes of 3 to 7 objects drawn from `pool`.
pub fn vqa_scenes(pool: &[AssetRecord], seed: u64) -> Vec<SceneLayout> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempt = 0u64;
    while out.len() < 100 {
        attempt += 1;
        let n = rng.gen_range(3..=7);
        let chosen: Vec<LayoutItem> = pool.choose_multiple(&mut rng, n).map(LayoutItem::from).collect();
        let table = Table::new(rng.gen_range(0.8..1.4), rng.gen_range(0.6..1.2)).unwrap();
        if let Ok(l) = sample_layout(&format!("scene_{:03}", out.len()), &chosen, table, attempt, 500) {
            out.push(l);
        }
    }
    out
}
