use nalgebra::Point3;

use crate::geometry::greedy_farthest;
use crate::model::{FunctionalPoint, GraspPoint, GraspPose};

/// Largest distance between a kept grasp and its nearest selected point.
pub const DEFAULT_PROXIMITY_THRESHOLD: f64 = 0.03;
/// Grasps retained by diversity sampling.
pub const DEFAULT_GRASP_K: usize = 100;
/// Metres of positional distance per radian of rotation in the 7-DoF metric.
pub const DEFAULT_ROTATION_WEIGHT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Keeps the grasps within `threshold` (inclusive) of at least one point.
pub fn proximity_filter(
    grasps: &[GraspPose],
    points: &[Point3<f64>],
    threshold: f64,
) -> Result<Vec<GraspPose>, FilterError> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(FilterError::Argument(format!("threshold {threshold} must be positive")));
    }
    Ok(grasps
        .iter()
        .filter(|g| points.iter().any(|p| (g.position - p).norm() <= threshold))
        .cloned()
        .collect())
}

/// `‖Δp‖ + w · θ`, θ the geodesic angle between the orientations.
pub fn pose_distance(a: &GraspPose, b: &GraspPose, rotation_weight: f64) -> f64 {
    (a.position - b.position).norm() + rotation_weight * a.orientation.angle_to(&b.orientation)
}

/// Indices picked by greedy farthest sampling under [`pose_distance`],
/// starting from the most confident grasp.
pub fn fps_7dof_indices(grasps: &[GraspPose], k: usize, rotation_weight: f64) -> Result<Vec<usize>, FilterError> {
    if k == 0 {
        return Err(FilterError::Argument("k must be at least 1".into()));
    }
    if !(rotation_weight.is_finite() && rotation_weight >= 0.0) {
        return Err(FilterError::Argument(format!("rotation weight {rotation_weight} must be non-negative")));
    }
    let mut seed = 0;
    for (i, g) in grasps.iter().enumerate() {
        if g.confidence > grasps[seed].confidence {
            seed = i;
        }
    }
    Ok(greedy_farthest(grasps.len(), k, seed, |a, b| {
        pose_distance(&grasps[a], &grasps[b], rotation_weight)
    }))
}

pub fn fps_7dof(grasps: &[GraspPose], k: usize, rotation_weight: f64) -> Result<Vec<GraspPose>, FilterError> {
    Ok(fps_7dof_indices(grasps, k, rotation_weight)?
        .into_iter()
        .map(|i| grasps[i].clone())
        .collect())
}

fn nearest_id<'a>(p: &Point3<f64>, items: impl Iterator<Item = (u32, &'a Point3<f64>)>) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for (id, q) in items {
        let d = (p - q).norm();
        let better = match best {
            None => true,
            Some((bid, bd)) => d < bd || (d == bd && id < bid),
        };
        if better {
            best = Some((id, d));
        }
    }
    best.map(|(id, _)| id)
}

/// Links each grasp to its nearest functional point and nearest grasp point.
pub fn associate_semantics(
    grasps: &[GraspPose],
    functional: &[FunctionalPoint],
    grasp_points: &[GraspPoint],
) -> Result<Vec<GraspPose>, FilterError> {
    if functional.is_empty() && grasp_points.is_empty() {
        return Err(FilterError::Argument("no points to associate with".into()));
    }
    Ok(grasps
        .iter()
        .map(|g| {
            let mut g = g.clone();
            g.associated_functional_point = nearest_id(&g.position, functional.iter().map(|f| (f.id, &f.position)));
            g.associated_grasp_point = nearest_id(&g.position, grasp_points.iter().map(|p| (p.id, &p.position)));
            g
        })
        .collect())
}
