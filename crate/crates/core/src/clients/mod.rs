//! Pluggable annotators for the externally modeled stages: quality gate,
//! property estimation, captioning, point selection and grasp proposal.
//!
//! [`MockClient`] answers every stage deterministically from geometry and a
//! fixture table; [`RemoteClient`] sends the same requests as JSON over HTTP.
//! Both implement [`AnnotationClient`] and are interchangeable.

mod antipodal;
mod messages;
mod mock;
mod remote;
mod stub;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use antipodal::{antipodal_pairs, AntipodalPair, ANTIPODAL_MAX_ANGLE_DEG, DEFAULT_MAX_PROPOSALS};
pub use messages::{Stage, StageRequest, StageResponse};
pub use mock::{MockClient, MockConfig};
pub use remote::{RemoteClient, RemoteConfig, ENDPOINT_ENV};
pub use stub::{StubBehavior, StubServer};

use crate::geometry::{GeometryError, RenderView};
use crate::model::{FunctionalPoint, GraspPoint, GraspPose, GripperModel, PhysicalProperties, PointCloud, SemanticCaption, TriMesh};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    /// The service could not be reached or answered with something unusable.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no fixture entry for asset `{0}`")]
    MissingFixture(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Identifies the asset a request is about.
#[derive(Debug, Clone, Copy)]
pub struct AssetContext<'a> {
    pub asset_id: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    NotSingleObject,
    LowVisualQuality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateResult {
    pub passed: bool,
    pub reasons: Vec<GateReason>,
}

impl GateResult {
    pub fn from_reasons(reasons: Vec<GateReason>) -> Self {
        GateResult {
            passed: reasons.is_empty(),
            reasons,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.passed == self.reasons.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyEstimate {
    pub properties: PhysicalProperties,
    /// Mass came from the box volume because the mesh encloses no volume.
    pub volume_fallback: bool,
}

/// Allowed number of points of each kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionBounds {
    pub functional_min: usize,
    pub functional_max: usize,
    pub grasp_min: usize,
    pub grasp_max: usize,
}

impl Default for SelectionBounds {
    fn default() -> Self {
        SelectionBounds {
            functional_min: 2,
            functional_max: 4,
            grasp_min: 2,
            grasp_max: 3,
        }
    }
}

/// Points chosen among the FPS candidates. `*_candidates[i]` is the candidate
/// index the i-th point of the matching list was taken from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSelection {
    pub functional_points: Vec<FunctionalPoint>,
    pub grasp_points: Vec<GraspPoint>,
    pub functional_candidates: Vec<usize>,
    pub grasp_candidates: Vec<usize>,
}

impl PointSelection {
    pub fn validate(&self, candidate_count: usize, bounds: &SelectionBounds) -> Result<(), ClientError> {
        let bad = |msg: String| Err(ClientError::Transport(format!("invalid point selection: {msg}")));
        if self.functional_candidates.len() != self.functional_points.len()
            || self.grasp_candidates.len() != self.grasp_points.len()
        {
            return bad("candidate references do not match point lists".into());
        }
        if let Some(i) = self
            .functional_candidates
            .iter()
            .chain(&self.grasp_candidates)
            .find(|&&i| i >= candidate_count)
        {
            return bad(format!("candidate index {i} out of range for {candidate_count}"));
        }
        let nf = self.functional_points.len();
        let ng = self.grasp_points.len();
        if !(bounds.functional_min..=bounds.functional_max).contains(&nf) {
            return bad(format!("{nf} functional points outside bounds"));
        }
        if !(bounds.grasp_min..=bounds.grasp_max).contains(&ng) {
            return bad(format!("{ng} grasp points outside bounds"));
        }
        if self.functional_points.iter().any(|p| !(0.0..=1.0).contains(&p.confidence)) {
            return bad("confidence outside [0, 1]".into());
        }
        Ok(())
    }
}

/// One implementation per backend. Implementations are stateless with respect
/// to assets and safe to share between worker threads.
pub trait AnnotationClient: Send + Sync {
    fn quality_gate(&self, ctx: AssetContext<'_>, mesh: &TriMesh, views: &[RenderView]) -> Result<GateResult, ClientError>;

    fn estimate_properties(
        &self,
        ctx: AssetContext<'_>,
        mesh: &TriMesh,
        views: &[RenderView],
    ) -> Result<PropertyEstimate, ClientError>;

    fn caption(&self, ctx: AssetContext<'_>, mesh: &TriMesh, views: &[RenderView]) -> Result<SemanticCaption, ClientError>;

    fn select_points(
        &self,
        ctx: AssetContext<'_>,
        mesh: &TriMesh,
        candidates: &PointCloud,
        views: &[RenderView],
    ) -> Result<PointSelection, ClientError>;

    fn propose_grasps(
        &self,
        ctx: AssetContext<'_>,
        cloud: &PointCloud,
        gripper: &GripperModel,
        max_n: usize,
        seed: u64,
    ) -> Result<Vec<GraspPose>, ClientError>;
}

/// Per-asset facts the mock annotators would otherwise read off images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub category: String,
    pub color: String,
    pub material: String,
    pub shape: String,
    pub function: String,
    /// Real-world length of the longest box side, used for rescaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longest_axis_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixtureTable(pub BTreeMap<String, FixtureEntry>);

impl FixtureTable {
    pub fn get(&self, asset_id: &str) -> Option<&FixtureEntry> {
        self.0.get(asset_id)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("fixture tables serialize");
        crate::model::write_atomic(path, text.as_bytes())
    }
}
