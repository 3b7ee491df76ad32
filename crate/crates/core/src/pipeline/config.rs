use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::clients::{SelectionBounds, DEFAULT_MAX_PROPOSALS};
use crate::geometry::{UpAxis, DEFAULT_FPS_CANDIDATES, DEFAULT_SURFACE_SAMPLES};
use crate::grasp::{VerifyConfig, DEFAULT_GRASP_K, DEFAULT_PROXIMITY_THRESHOLD, DEFAULT_ROTATION_WEIGHT};
use crate::model::GripperModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    Mock,
    Remote,
}

pub const DEFAULT_VIEWS: usize = 8;
pub const DEFAULT_RENDER_SIZE: u32 = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub store: PathBuf,
    pub seed: u64,
    pub clients: ClientMode,
    /// Base URL for remote clients.
    pub endpoint: Option<String>,
    pub surface_samples: usize,
    pub fps_k: usize,
    pub max_proposals: usize,
    pub proximity_threshold: f64,
    pub grasp_k: usize,
    pub rotation_weight: f64,
    pub views: usize,
    pub render_size: u32,
    pub up_axis: UpAxis,
    pub bounds: SelectionBounds,
    pub gripper: GripperModel,
    pub verify: VerifyConfig,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

impl PipelineConfig {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            store: store.into(),
            seed: 0,
            clients: ClientMode::Mock,
            endpoint: None,
            surface_samples: DEFAULT_SURFACE_SAMPLES,
            fps_k: DEFAULT_FPS_CANDIDATES,
            max_proposals: DEFAULT_MAX_PROPOSALS,
            proximity_threshold: DEFAULT_PROXIMITY_THRESHOLD,
            grasp_k: DEFAULT_GRASP_K,
            rotation_weight: DEFAULT_ROTATION_WEIGHT,
            views: DEFAULT_VIEWS,
            render_size: DEFAULT_RENDER_SIZE,
            up_axis: UpAxis::Z,
            bounds: SelectionBounds::default(),
            gripper: GripperModel::default(),
            verify: VerifyConfig::default(),
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("proximity_threshold", self.proximity_threshold)?;
        if !(self.rotation_weight.is_finite() && self.rotation_weight >= 0.0) {
            return Err(format!("rotation_weight must be non-negative, got {}", self.rotation_weight));
        }
        for (name, v) in [
            ("surface_samples", self.surface_samples),
            ("fps_k", self.fps_k),
            ("max_proposals", self.max_proposals),
            ("grasp_k", self.grasp_k),
            ("views", self.views),
        ] {
            if v == 0 {
                return Err(format!("{name} must be at least 1"));
            }
        }
        if self.render_size == 0 {
            return Err("render_size must be at least 1".into());
        }
        if self.fps_k > self.surface_samples {
            return Err(format!("fps_k {} exceeds surface_samples {}", self.fps_k, self.surface_samples));
        }
        self.gripper.validate().map_err(|e| e.to_string())?;
        positive("gravity", self.verify.gravity)?;
        if !(self.verify.test_acceleration.is_finite() && self.verify.test_acceleration >= 0.0) {
            return Err("test_acceleration must be non-negative".into());
        }
        positive("displacement_threshold", self.verify.displacement_threshold)?;
        if let Some(mu) = self.verify.mu {
            if !(mu.is_finite() && (0.0..=2.0).contains(&mu)) {
                return Err(format!("mu {mu} outside [0, 2]"));
            }
        }
        if let Some(f) = self.verify.squeeze_force {
            positive("squeeze_force", f)?;
        }
        let b = &self.bounds;
        if b.functional_min > b.functional_max || b.grasp_min > b.grasp_max {
            return Err("selection bounds have min above max".into());
        }
        if self.clients == ClientMode::Remote && self.endpoint.is_none() {
            return Err("remote clients need an endpoint".into());
        }
        Ok(())
    }
}
