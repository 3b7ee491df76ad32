//! Template question–answer pairs whose answers are computed from scene
//! geometry and asset records. Every pair carries the facts it was derived
//! from so it can be re-checked against the layout.

use std::collections::BTreeMap;

use nalgebra::{Point2, Point3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layout::{Placement, SceneLayout};
use crate::model::{AssetRecord, GraspType};

pub const DETECTION_ATTRIBUTES: [&str; 4] = ["category", "color", "material", "shape"];
/// Distance of the viewer in front of the near table edge (`y = 0`).
pub const VIEWER_STANDOFF: f64 = 1.0;
/// Largest displacement per axis in task-planning questions.
pub const MAX_MOVE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VqaCategory {
    Detection,
    LanguageGrounding,
    FunctionalPlanning,
    SceneUnderstanding,
    TaskPlanning,
}

impl VqaCategory {
    pub const ALL: [VqaCategory; 5] = [
        VqaCategory::Detection,
        VqaCategory::LanguageGrounding,
        VqaCategory::FunctionalPlanning,
        VqaCategory::SceneUnderstanding,
        VqaCategory::TaskPlanning,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fact", rename_all = "snake_case")]
pub enum Fact {
    /// Number of scene objects whose caption attribute equals `value`.
    AttributeCount { attribute: String, value: String, count: usize },
    /// The attribute values in `attributes` single out `asset_id` in the scene.
    Referent { asset_id: String, attributes: BTreeMap<String, String> },
    /// Grasp type of the lowest-id grasp point.
    GraspType { asset_id: String, grasp_point: u32, grasp_type: GraspType },
    /// Sight line from `viewer` to a functional point, in table coordinates.
    LineOfSight {
        asset_id: String,
        functional_point: u32,
        label: String,
        target: [f64; 2],
        viewer: [f64; 2],
        blocked_by: Vec<String>,
    },
    /// Smallest circle-to-circle gap from `asset_id` to any other object.
    Clearance { asset_id: String, neighbor: String, gap: f64 },
    /// Straight moves applied one after another to `asset_id`'s circle.
    Sweep { asset_id: String, moves: Vec<[f64; 2]>, collides_with: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub asset_ids: Vec<String>,
    pub facts: Vec<Fact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqaPair {
    pub scene_id: String,
    pub category: VqaCategory,
    pub question: String,
    pub answer: String,
    pub grounding: Grounding,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VqaError {
    #[error("scene object `{0}` has no asset record")]
    UnknownAsset(String),
}

struct SceneObject<'a> {
    placement: &'a Placement,
    record: &'a AssetRecord,
}

impl SceneObject<'_> {
    fn center(&self) -> Point2<f64> {
        Point2::new(self.placement.position[0], self.placement.position[1])
    }

    fn radius(&self) -> f64 {
        self.record.placement.collision_radius
    }

    fn world(&self, p: &Point3<f64>) -> Point3<f64> {
        self.placement.world_pose(self.record) * p
    }
}

/// Distance from `c` to the segment `a`–`b`.
pub fn point_segment_distance(c: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((c - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (c - (a + ab * t)).norm()
}

/// The attributes used to name an object, widened until they are unique in
/// the scene. `None` when even the widest set is shared.
fn referent(objects: &[SceneObject<'_>], i: usize) -> Option<BTreeMap<String, String>> {
    const LEVELS: [&[&str]; 3] = [&["category"], &["color", "category"], &["color", "material", "category"]];
    let caption = &objects[i].record.caption;
    for keys in LEVELS {
        let attrs: BTreeMap<String, String> = keys
            .iter()
            .map(|k| (k.to_string(), caption.attribute(k).unwrap_or_default().to_string()))
            .collect();
        let matches = objects
            .iter()
            .filter(|o| attrs.iter().all(|(k, v)| o.record.caption.attribute(k) == Some(v.as_str())))
            .count();
        if matches == 1 {
            return Some(attrs);
        }
    }
    None
}

/// "the red ceramic mug" from a referent map, in color, material, category order.
pub fn describe(attributes: &BTreeMap<String, String>) -> String {
    let words: Vec<&str> = ["color", "material", "category"]
        .iter()
        .filter_map(|k| attributes.get(*k).map(String::as_str))
        .collect();
    format!("the {}", words.join(" "))
}

pub fn format_length(meters: f64) -> String {
    format!("{meters:.3} m")
}

fn pair(scene: &str, category: VqaCategory, question: String, answer: String, ids: Vec<String>, facts: Vec<Fact>) -> VqaPair {
    VqaPair {
        scene_id: scene.to_string(),
        category,
        question,
        answer,
        grounding: Grounding { asset_ids: ids, facts },
    }
}

fn detection(scene: &str, objects: &[SceneObject<'_>]) -> Vec<VqaPair> {
    let mut out = Vec::new();
    for attribute in DETECTION_ATTRIBUTES {
        let mut counts: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for o in objects {
            if let Some(v) = o.record.caption.attribute(attribute) {
                counts.entry(v).or_default().push(o.record.asset_id.clone());
            }
        }
        for (value, ids) in counts {
            let question = match attribute {
                "category" => format!("How many objects of category {value} are on the table?"),
                _ => format!("How many objects with {attribute} {value} are on the table?"),
            };
            let count = ids.len();
            out.push(pair(
                scene,
                VqaCategory::Detection,
                question,
                count.to_string(),
                ids,
                vec![Fact::AttributeCount {
                    attribute: attribute.to_string(),
                    value: value.to_string(),
                    count,
                }],
            ));
        }
    }
    out
}

fn language_grounding(scene: &str, objects: &[SceneObject<'_>]) -> Vec<VqaPair> {
    let mut out = Vec::new();
    for (i, o) in objects.iter().enumerate() {
        let Some(attributes) = referent(objects, i) else { continue };
        let Some(gp) = o.record.grasp_points.iter().min_by_key(|g| g.id) else { continue };
        let name = describe(&attributes);
        let id = o.record.asset_id.clone();
        out.push(pair(
            scene,
            VqaCategory::LanguageGrounding,
            format!("Which grasp type should a robot use to pick up {name}?"),
            gp.grasp_type.as_str().to_string(),
            vec![id.clone()],
            vec![
                Fact::Referent { asset_id: id.clone(), attributes },
                Fact::GraspType { asset_id: id, grasp_point: gp.id, grasp_type: gp.grasp_type },
            ],
        ));
    }
    out
}

fn functional_planning(scene: &str, layout: &SceneLayout, objects: &[SceneObject<'_>]) -> Vec<VqaPair> {
    let viewer = Point2::new(layout.table.width / 2.0, -VIEWER_STANDOFF);
    let mut out = Vec::new();
    for (i, o) in objects.iter().enumerate() {
        let Some(attributes) = referent(objects, i) else { continue };
        let name = describe(&attributes);
        for fp in &o.record.functional_points {
            let w = o.world(&fp.position);
            let target = Point2::new(w.x, w.y);
            let blocked_by: Vec<String> = objects
                .iter()
                .enumerate()
                .filter(|&(j, other)| j != i && point_segment_distance(&other.center(), &viewer, &target) < other.radius())
                .map(|(_, other)| other.record.asset_id.clone())
                .collect();
            let answer = if blocked_by.is_empty() {
                "yes".to_string()
            } else {
                let names: Vec<String> = blocked_by
                    .iter()
                    .map(|id| {
                        let j = objects.iter().position(|x| &x.record.asset_id == id).expect("blocker is in scene");
                        referent(objects, j).map_or_else(|| id.clone(), |a| describe(&a))
                    })
                    .collect();
                format!("no, blocked by {}", names.join(", "))
            };
            let mut ids = vec![o.record.asset_id.clone()];
            ids.extend(blocked_by.iter().cloned());
            out.push(pair(
                scene,
                VqaCategory::FunctionalPlanning,
                format!(
                    "Can the {} point of {name} be reached in a straight line from the front of the table?",
                    fp.function_label
                ),
                answer,
                ids,
                vec![
                    Fact::Referent { asset_id: o.record.asset_id.clone(), attributes: attributes.clone() },
                    Fact::LineOfSight {
                        asset_id: o.record.asset_id.clone(),
                        functional_point: fp.id,
                        label: fp.function_label.clone(),
                        target: [target.x, target.y],
                        viewer: [viewer.x, viewer.y],
                        blocked_by,
                    },
                ],
            ));
        }
    }
    out
}

fn scene_understanding(scene: &str, objects: &[SceneObject<'_>]) -> Vec<VqaPair> {
    let mut out = Vec::new();
    for (i, o) in objects.iter().enumerate() {
        let Some(attributes) = referent(objects, i) else { continue };
        let mut nearest: Option<(usize, f64)> = None;
        for (j, other) in objects.iter().enumerate() {
            if j == i {
                continue;
            }
            let gap = (o.center() - other.center()).norm() - o.radius() - other.radius();
            if nearest.map_or(true, |(_, g)| gap < g) {
                nearest = Some((j, gap));
            }
        }
        let Some((j, gap)) = nearest else { continue };
        let neighbor_name = referent(objects, j).map_or_else(|| objects[j].record.asset_id.clone(), |a| describe(&a));
        out.push(pair(
            scene,
            VqaCategory::SceneUnderstanding,
            format!("How much free space separates {} from its closest neighbor?", describe(&attributes)),
            format!("{} to {neighbor_name}", format_length(gap)),
            vec![o.record.asset_id.clone(), objects[j].record.asset_id.clone()],
            vec![
                Fact::Referent { asset_id: o.record.asset_id.clone(), attributes },
                Fact::Clearance {
                    asset_id: o.record.asset_id.clone(),
                    neighbor: objects[j].record.asset_id.clone(),
                    gap,
                },
            ],
        ));
    }
    out
}

/// Objects whose circle the moving circle would pass into. Touching at the
/// start or along the way is not a collision.
pub fn sweep_collisions(
    objects: &[(String, Point2<f64>, f64)],
    mover: usize,
    moves: &[[f64; 2]],
) -> Vec<String> {
    let (_, start, r) = &objects[mover];
    let mut path = vec![*start];
    for m in moves {
        let last = *path.last().expect("path starts non-empty");
        path.push(Point2::new(last.x + m[0], last.y + m[1]));
    }
    objects
        .iter()
        .enumerate()
        .filter(|&(j, (_, c, rj))| {
            j != mover && path.windows(2).any(|s| point_segment_distance(c, &s[0], &s[1]) < r + rj)
        })
        .map(|(_, (id, _, _))| id.clone())
        .collect()
}

fn task_planning(scene: &str, objects: &[SceneObject<'_>], rng: &mut ChaCha8Rng, n: usize) -> Vec<VqaPair> {
    let circles: Vec<(String, Point2<f64>, f64)> = objects
        .iter()
        .map(|o| (o.record.asset_id.clone(), o.center(), o.radius()))
        .collect();
    let nameable: Vec<usize> = (0..objects.len()).filter(|&i| referent(objects, i).is_some()).collect();
    let mut out = Vec::new();
    if nameable.is_empty() {
        return out;
    }
    let centimeters = (MAX_MOVE * 100.0).round() as i32;
    for _ in 0..n {
        let i = nameable[rng.gen_range(0..nameable.len())];
        let moves = [
            [rng.gen_range(-centimeters..=centimeters) as f64 / 100.0, 0.0],
            [0.0, rng.gen_range(-centimeters..=centimeters) as f64 / 100.0],
        ];
        let attributes = referent(objects, i).expect("index chosen among nameable objects");
        let collides_with = sweep_collisions(&circles, i, &moves);
        let answer = if collides_with.is_empty() { "no".to_string() } else { "yes".to_string() };
        let mut ids = vec![circles[i].0.clone()];
        ids.extend(collides_with.iter().cloned());
        out.push(pair(
            scene,
            VqaCategory::TaskPlanning,
            format!(
                "If {} is slid {:+.2} m along x and then {:+.2} m along y, does it bump into another object?",
                describe(&attributes),
                moves[0][0],
                moves[1][1]
            ),
            answer,
            ids,
            vec![
                Fact::Referent { asset_id: circles[i].0.clone(), attributes },
                Fact::Sweep { asset_id: circles[i].0.clone(), moves: moves.to_vec(), collides_with },
            ],
        ));
    }
    out
}

/// Up to `per_category` pairs for each category, deterministic per seed.
pub fn generate_vqa(
    layout: &SceneLayout,
    records: &[AssetRecord],
    per_category: usize,
    seed: u64,
) -> Result<Vec<VqaPair>, VqaError> {
    let objects = layout
        .placements
        .iter()
        .map(|placement| {
            records
                .iter()
                .find(|r| r.asset_id == placement.asset_id)
                .map(|record| SceneObject { placement, record })
                .ok_or_else(|| VqaError::UnknownAsset(placement.asset_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = layout.scene_id.as_str();
    let mut out = Vec::new();
    for category in VqaCategory::ALL {
        let mut pool = match category {
            VqaCategory::Detection => detection(scene, &objects),
            VqaCategory::LanguageGrounding => language_grounding(scene, &objects),
            VqaCategory::FunctionalPlanning => functional_planning(scene, layout, &objects),
            VqaCategory::SceneUnderstanding => scene_understanding(scene, &objects),
            VqaCategory::TaskPlanning => task_planning(scene, &objects, &mut rng, per_category),
        };
        pool.shuffle(&mut rng);
        pool.truncate(per_category);
        out.extend(pool);
    }
    Ok(out)
}
