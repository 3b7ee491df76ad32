//! Rejection sampling of collision-free tabletop scenes.
//!
//! Each object occupies its collision circle on the table plane. The table is
//! the rectangle `[0, width] × [0, depth]`.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::AssetRecord;

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;
/// Slack the validator allows on every comparison.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayoutError {
    #[error("could not place `{asset_id}` inside the table without overlap")]
    Infeasible { asset_id: String },
    #[error("unknown asset `{0}`")]
    UnknownAsset(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub width: f64,
    pub depth: f64,
}

impl Table {
    pub fn new(width: f64, depth: f64) -> Result<Self, LayoutError> {
        if !(width.is_finite() && width > 0.0 && depth.is_finite() && depth > 0.0) {
            return Err(LayoutError::Argument(format!("table {width} × {depth} must have positive size")));
        }
        Ok(Table { width, depth })
    }
}

/// What the sampler needs to know about an asset.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutItem {
    pub asset_id: String,
    pub radius: f64,
}

impl From<&AssetRecord> for LayoutItem {
    fn from(record: &AssetRecord) -> Self {
        LayoutItem {
            asset_id: record.asset_id.clone(),
            radius: record.placement.collision_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub asset_id: String,
    pub position: [f64; 2],
    pub yaw: f64,
}

impl Placement {
    /// Pose that moves the asset's rest point onto the table at `position`,
    /// turned by `yaw` about the vertical.
    pub fn world_pose(&self, record: &AssetRecord) -> Isometry3<f64> {
        let rest = &record.placement;
        let upright = rest.placement_orientation.to_unit();
        let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw);
        let rotation = yaw * upright;
        let anchor = rotation * rest.placement_position.coords;
        Isometry3::from_parts(
            Translation3::new(self.position[0] - anchor.x, self.position[1] - anchor.y, -anchor.z),
            rotation,
        )
    }
}

/// How the scene's objects were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Explicit,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub scene_id: String,
    pub table: Table,
    pub placements: Vec<Placement>,
    pub seed: u64,
    pub selection: SelectionMode,
}

impl SceneLayout {
    pub fn save(&self, path: &Path) -> Result<(), LayoutError> {
        let text = serde_json::to_string_pretty(self).expect("layouts serialize") + "\n";
        crate::model::write_atomic(path, text.as_bytes()).map_err(|e| LayoutError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, LayoutError> {
        let text = std::fs::read_to_string(path).map_err(|e| LayoutError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LayoutError::Io(format!("{}: {e}", path.display())))
    }
}

/// Places `items` in order. Each position is uniform over the table inset by
/// the item's radius and is kept once it clears every earlier circle
/// (tangency allowed).
pub fn sample_layout(
    scene_id: &str,
    items: &[LayoutItem],
    table: Table,
    seed: u64,
    max_attempts: usize,
) -> Result<SceneLayout, LayoutError> {
    if max_attempts == 0 {
        return Err(LayoutError::Argument("max_attempts must be at least 1".into()));
    }
    if let Some(bad) = items.iter().find(|i| !(i.radius.is_finite() && i.radius > 0.0)) {
        return Err(LayoutError::Argument(format!("`{}` has radius {}", bad.asset_id, bad.radius)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placed: Vec<(Placement, f64)> = Vec::with_capacity(items.len());
    for item in items {
        let r = item.radius;
        if 2.0 * r > table.width || 2.0 * r > table.depth {
            return Err(LayoutError::Infeasible {
                asset_id: item.asset_id.clone(),
            });
        }
        let mut accepted = None;
        for _ in 0..max_attempts {
            let x = rng.gen_range(r..=table.width - r);
            let y = rng.gen_range(r..=table.depth - r);
            let yaw = rng.gen_range(0.0..TAU);
            let clear = placed.iter().all(|(p, pr)| {
                let (dx, dy) = (x - p.position[0], y - p.position[1]);
                (dx * dx + dy * dy).sqrt() >= r + pr
            });
            if clear {
                accepted = Some(Placement {
                    asset_id: item.asset_id.clone(),
                    position: [x, y],
                    yaw,
                });
                break;
            }
        }
        let placement = accepted.ok_or_else(|| LayoutError::Infeasible {
            asset_id: item.asset_id.clone(),
        })?;
        placed.push((placement, r));
    }
    Ok(SceneLayout {
        scene_id: scene_id.to_string(),
        table,
        placements: placed.into_iter().map(|(p, _)| p).collect(),
        seed,
        selection: SelectionMode::Explicit,
    })
}

/// Uniformly picks `n` distinct records, returned in ascending index order.
pub fn choose_assets<'a>(records: &'a [AssetRecord], n: usize, seed: u64) -> Result<Vec<&'a AssetRecord>, LayoutError> {
    if n > records.len() {
        return Err(LayoutError::Argument(format!("asked for {n} objects, only {} available", records.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, records.len(), n).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| &records[i]).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Overlap { first: usize, second: usize, distance: f64, required: f64 },
    OutOfBounds { index: usize },
}

/// Every overlapping pair and every circle leaving the table.
pub fn validate_layout(layout: &SceneLayout, items: &[LayoutItem]) -> Result<Vec<Violation>, LayoutError> {
    let radii = layout
        .placements
        .iter()
        .map(|p| {
            items
                .iter()
                .find(|i| i.asset_id == p.asset_id)
                .map(|i| i.radius)
                .ok_or_else(|| LayoutError::UnknownAsset(p.asset_id.clone()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let t = VALIDATION_TOLERANCE;
    let mut out = Vec::new();
    for (i, p) in layout.placements.iter().enumerate() {
        let [x, y] = p.position;
        let r = radii[i];
        let inside = x.is_finite()
            && y.is_finite()
            && x - r >= -t
            && y - r >= -t
            && x + r <= layout.table.width + t
            && y + r <= layout.table.depth + t;
        if !inside {
            out.push(Violation::OutOfBounds { index: i });
        }
    }
    for i in 0..layout.placements.len() {
        for j in i + 1..layout.placements.len() {
            let [xi, yi] = layout.placements[i].position;
            let [xj, yj] = layout.placements[j].position;
            let distance = (xi - xj).hypot(yi - yj);
            let required = radii[i] + radii[j];
            if distance < required - t {
                out.push(Violation::Overlap {
                    first: i,
                    second: j,
                    distance,
                    required,
                });
            }
        }
    }
    Ok(out)
}
