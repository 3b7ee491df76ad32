//! JSON messages exchanged with a remote annotation service.
//!
//! Every stage is a `POST {base}/v1/stages/{stage}` carrying a [`StageRequest`]
//! and an `Idempotency-Key: {asset_id}:{stage}` header. The service answers
//! with a [`StageResponse`] echoing stage and asset id:
//!
//! | stage                 | payload            | response            |
//! |-----------------------|--------------------|---------------------|
//! | `quality_gate`        | [`MeshPayload`]    | `GateResult`        |
//! | `estimate_properties` | [`MeshPayload`]    | `PropertyEstimate`  |
//! | `caption`             | [`MeshPayload`]    | `SemanticCaption`   |
//! | `select_points`       | [`SelectPayload`]  | `PointSelection`    |
//! | `propose_grasps`      | [`ProposePayload`] | list of `GraspPose` |

use std::fmt;

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::geometry::{Camera, RenderView};
use crate::model::{GripperModel, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    QualityGate,
    EstimateProperties,
    Caption,
    SelectPoints,
    ProposeGrasps,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::QualityGate,
        Stage::EstimateProperties,
        Stage::Caption,
        Stage::SelectPoints,
        Stage::ProposeGrasps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::QualityGate => "quality_gate",
            Stage::EstimateProperties => "estimate_properties",
            Stage::Caption => "caption",
            Stage::SelectPoints => "select_points",
            Stage::ProposeGrasps => "propose_grasps",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|stage| stage.as_str() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRequest<P> {
    pub stage: Stage,
    pub asset_id: String,
    pub idempotency_key: String,
    pub payload: P,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageResponse<R> {
    pub stage: Stage,
    pub asset_id: String,
    pub response: R,
}

/// A rendered view as base64 PNG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedView {
    pub view_index: usize,
    pub camera: Camera,
    pub png_base64: String,
}

impl EncodedView {
    pub fn encode(view: &RenderView) -> Self {
        EncodedView {
            view_index: view.view_index,
            camera: view.camera,
            png_base64: base64::engine::general_purpose::STANDARD.encode(view.to_png()),
        }
    }

    pub fn decode(&self) -> Result<RenderView, String> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.png_base64)
            .map_err(|e| format!("view {}: {e}", self.view_index))?;
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| format!("view {}: {e}", self.view_index))?
            .to_rgb8();
        Ok(RenderView {
            width: img.width(),
            height: img.height(),
            view_index: self.view_index,
            pixels: img.pixels().map(|p| p.0).collect(),
            camera: self.camera,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshPayload {
    /// Mesh as OBJ text.
    pub mesh_obj: String,
    pub views: Vec<EncodedView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectPayload {
    pub mesh_obj: String,
    pub candidates: PointCloud,
    pub views: Vec<EncodedView>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposePayload {
    pub cloud: PointCloud,
    pub gripper: GripperModel,
    pub max_n: usize,
    pub seed: u64,
}
