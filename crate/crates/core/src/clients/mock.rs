use std::collections::BTreeMap;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::antipodal::antipodal_pairs;
use super::{
    AnnotationClient, AssetContext, ClientError, FixtureTable, GateReason, GateResult, PointSelection, PropertyEstimate,
    SelectionBounds,
};
use crate::geometry::{connected_components, degenerate_face_ratio, enclosed_volume, mesh_obb, volume_centroid, RenderView};
use crate::model::{
    FunctionalPoint, GraspPoint, GraspPose, GraspType, GripperModel, PhysicalProperties, PointCloud, SemanticCaption,
    TriMesh,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    /// kg/m³
    pub density: f64,
    /// Share of the box volume assumed solid when the mesh encloses nothing.
    pub fill_factor: f64,
    /// A component counts as a separate object above this share of the total volume.
    pub component_share: f64,
    pub max_degenerate_ratio: f64,
    pub bounds: SelectionBounds,
    /// Friction coefficient per material name.
    pub friction_by_material: BTreeMap<String, f64>,
    pub default_friction: f64,
}

impl Default for MockConfig {
    fn default() -> Self {
        let friction_by_material = [
            ("plastic", 0.3),
            ("rubber", 0.5),
            ("wood", 0.4),
            ("metal", 0.25),
            ("ceramic", 0.35),
            ("glass", 0.2),
            ("fabric", 0.6),
            ("paper", 0.45),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        MockConfig {
            density: 500.0,
            fill_factor: 0.3,
            component_share: 0.05,
            max_degenerate_ratio: 0.2,
            bounds: SelectionBounds::default(),
            friction_by_material,
            default_friction: 0.3,
        }
    }
}

/// Deterministic stand-in for the vision-language and grasp models.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    pub fixtures: FixtureTable,
    pub config: MockConfig,
}

/// Size word for the longest box side.
pub(crate) fn size_bucket(longest_axis: f64) -> &'static str {
    if longest_axis < 0.1 {
        "small"
    } else if longest_axis < 0.25 {
        "medium"
    } else {
        "large"
    }
}

fn faces_volume(mesh: &TriMesh, faces: &[usize]) -> f64 {
    faces
        .iter()
        .map(|&f| {
            let [a, b, c] = mesh.triangle(f);
            a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
        })
        .sum::<f64>()
        .abs()
}

fn faces_area(mesh: &TriMesh, faces: &[usize]) -> f64 {
    faces.iter().map(|&f| mesh.face_area(f)).sum()
}

/// Picks up to `count` distinct candidates, each rule ranking by key (largest
/// first, lowest index on ties) and skipping candidates already used.
fn pick_by_rules<'a>(
    points: &[Point3<f64>],
    rules: &[(&'a str, &dyn Fn(&Point3<f64>) -> f64)],
    count: usize,
) -> Vec<(usize, &'a str)> {
    let mut chosen: Vec<(usize, &str)> = Vec::new();
    for (label, key) in rules.iter().take(count) {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if chosen.iter().any(|(c, _)| *c == i) {
                continue;
            }
            let k = key(p);
            if best.map_or(true, |(_, b)| k > b) {
                best = Some((i, k));
            }
        }
        if let Some((i, _)) = best {
            chosen.push((i, label));
        }
    }
    chosen
}

impl AnnotationClient for MockClient {
    fn quality_gate(&self, _ctx: AssetContext<'_>, mesh: &TriMesh, views: &[RenderView]) -> Result<GateResult, ClientError> {
        if views.is_empty() {
            return Err(ClientError::Argument("quality gate needs at least one view".into()));
        }
        let mut reasons = Vec::new();
        let components = connected_components(mesh);
        if components.len() > 1 {
            let volumes: Vec<f64> = components.iter().map(|c| faces_volume(mesh, c)).collect();
            let total: f64 = volumes.iter().sum();
            // open surfaces enclose nothing; compare by area instead
            let shares: Vec<f64> = if total > 0.0 {
                volumes.iter().map(|v| v / total).collect()
            } else {
                let areas: Vec<f64> = components.iter().map(|c| faces_area(mesh, c)).collect();
                let total: f64 = areas.iter().sum();
                areas.iter().map(|a| if total > 0.0 { a / total } else { 0.0 }).collect()
            };
            if shares.iter().filter(|&&s| s > self.config.component_share).count() > 1 {
                reasons.push(GateReason::NotSingleObject);
            }
        }
        if mesh.is_empty() || degenerate_face_ratio(mesh) > self.config.max_degenerate_ratio {
            reasons.push(GateReason::LowVisualQuality);
        }
        Ok(GateResult::from_reasons(reasons))
    }

    fn estimate_properties(
        &self,
        ctx: AssetContext<'_>,
        mesh: &TriMesh,
        _views: &[RenderView],
    ) -> Result<PropertyEstimate, ClientError> {
        let obb = mesh_obb(mesh)?;
        let mut volume = enclosed_volume(mesh);
        let volume_fallback = volume <= 1e-12;
        if volume_fallback {
            volume = obb.volume() * self.config.fill_factor;
        }
        let friction = self
            .fixtures
            .get(ctx.asset_id)
            .and_then(|f| self.config.friction_by_material.get(&f.material.to_lowercase()))
            .copied()
            .unwrap_or(self.config.default_friction);
        let properties = PhysicalProperties {
            obb_dims: obb.dims(),
            mass: volume * self.config.density,
            friction,
            obb,
        };
        properties
            .validate()
            .map_err(|e| ClientError::Argument(format!("cannot estimate properties: {e}")))?;
        Ok(PropertyEstimate {
            properties,
            volume_fallback,
        })
    }

    fn caption(&self, ctx: AssetContext<'_>, mesh: &TriMesh, _views: &[RenderView]) -> Result<SemanticCaption, ClientError> {
        let entry = self
            .fixtures
            .get(ctx.asset_id)
            .ok_or_else(|| ClientError::MissingFixture(ctx.asset_id.to_string()))?;
        let longest = mesh_obb(mesh)?.longest_axis();
        Ok(SemanticCaption {
            category: entry.category.clone(),
            color: entry.color.clone(),
            material: entry.material.clone(),
            size: size_bucket(longest).to_string(),
            shape: entry.shape.clone(),
            function: entry.function.clone(),
        })
    }

    fn select_points(
        &self,
        _ctx: AssetContext<'_>,
        mesh: &TriMesh,
        candidates: &PointCloud,
        views: &[RenderView],
    ) -> Result<PointSelection, ClientError> {
        let bounds = &self.config.bounds;
        let n = candidates.len();
        if n < 4 || n < bounds.functional_min + bounds.grasp_min {
            return Err(ClientError::Argument(format!(
                "{n} candidates cannot supply {} functional and {} grasp points",
                bounds.functional_min, bounds.grasp_min
            )));
        }
        if views.is_empty() {
            return Err(ClientError::Argument("point selection needs at least one view".into()));
        }
        let centroid = volume_centroid(mesh).ok_or_else(|| ClientError::Argument("mesh has no vertices".into()))?;
        let pts = candidates.points();

        let functional_rules: [(&str, &dyn Fn(&Point3<f64>) -> f64); 4] = [
            ("top", &|p| p.z),
            ("base", &|p| -p.z),
            ("side", &|p| p.x),
            ("opposite side", &|p| -p.x),
        ];
        let functional = pick_by_rules(pts, &functional_rules, bounds.functional_min);

        let near = |p: &Point3<f64>| -(p - centroid).norm();
        let grasp_rules: [(&str, &dyn Fn(&Point3<f64>) -> f64); 3] =
            [("pick and place", &near), ("precision handling", &near), ("power hold", &near)];
        let grasp = pick_by_rules(pts, &grasp_rules, bounds.grasp_min);
        let grasp_types = [GraspType::ParallelJaw, GraspType::Pinch, GraspType::Power];

        Ok(PointSelection {
            functional_points: functional
                .iter()
                .enumerate()
                .map(|(id, &(c, label))| FunctionalPoint {
                    id: id as u32,
                    position: pts[c],
                    function_label: label.to_string(),
                    confidence: 0.9,
                    rationale: format!("extreme candidate for the `{label}` rule"),
                })
                .collect(),
            grasp_points: grasp
                .iter()
                .enumerate()
                .map(|(id, &(c, scenario))| GraspPoint {
                    id: id as u32,
                    position: pts[c],
                    grasp_type: grasp_types[id % grasp_types.len()],
                    use_scenario: scenario.to_string(),
                })
                .collect(),
            functional_candidates: functional.iter().map(|&(c, _)| c).collect(),
            grasp_candidates: grasp.iter().map(|&(c, _)| c).collect(),
        })
    }

    fn propose_grasps(
        &self,
        _ctx: AssetContext<'_>,
        cloud: &PointCloud,
        gripper: &GripperModel,
        max_n: usize,
        seed: u64,
    ) -> Result<Vec<GraspPose>, ClientError> {
        Ok(antipodal_pairs(cloud, gripper, max_n, seed)?
            .into_iter()
            .map(|pair| pair.pose)
            .collect())
    }
}
