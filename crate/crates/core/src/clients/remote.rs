use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::messages::{EncodedView, MeshPayload, ProposePayload, SelectPayload, Stage, StageRequest, StageResponse};
use super::{
    AnnotationClient, AssetContext, ClientError, GateResult, PointSelection, PropertyEstimate, SelectionBounds,
};
use crate::geometry::{write_obj, RenderView};
use crate::model::{GraspPose, GripperModel, PointCloud, SemanticCaption, TriMesh};

/// Environment variable holding the service base URL.
pub const ENDPOINT_ENV: &str = "TWINKIT_ENDPOINT";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub max_attempts: u32,
    /// Delay before the first retry; doubled on each further retry.
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub bounds: SelectionBounds,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            timeout: Duration::from_secs(30),
            max_attempts: 3,
            backoff: Duration::from_millis(200),
            max_in_flight: 8,
            bounds: SelectionBounds::default(),
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(ENDPOINT_ENV).ok().map(Self::new)
    }
}

/// Counting gate on concurrent requests.
struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut count = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *count >= self.limit {
            count = self.freed.wait(count).unwrap_or_else(|e| e.into_inner());
        }
        *count += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

/// HTTP adapter speaking the stage messages documented in [`super::messages`].
pub struct RemoteClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl RemoteClient {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let in_flight = InFlight {
            count: Mutex::new(0),
            freed: Condvar::new(),
            limit: config.max_in_flight.max(1),
        };
        RemoteClient {
            config,
            agent,
            in_flight,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn call<P: Serialize, R: DeserializeOwned>(&self, stage: Stage, asset_id: &str, payload: P) -> Result<R, ClientError> {
        let key = format!("{asset_id}:{stage}");
        let request = StageRequest {
            stage,
            asset_id: asset_id.to_string(),
            idempotency_key: key.clone(),
            payload,
        };
        let body = serde_json::to_vec(&request).map_err(|e| ClientError::Transport(e.to_string()))?;
        let url = format!("{}/v1/stages/{stage}", self.config.base_url.trim_end_matches('/'));

        let _slot = self.in_flight.acquire();
        let mut delay = self.config.backoff;
        let mut last = String::new();
        for attempt in 1..=self.config.max_attempts.max(1) {
            match self.attempt::<R>(&url, &key, &body) {
                Ok(resp) => {
                    if resp.stage != stage || resp.asset_id != asset_id {
                        return Err(ClientError::Transport(format!(
                            "response for {}:{} does not match request {key}",
                            resp.asset_id, resp.stage
                        )));
                    }
                    return Ok(resp.response);
                }
                Err(Attempt::Fatal(msg)) => return Err(ClientError::Transport(msg)),
                Err(Attempt::Retry(msg)) => {
                    log::debug!("{key}: attempt {attempt} failed: {msg}");
                    last = msg;
                    if attempt < self.config.max_attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(ClientError::Transport(format!(
            "{key}: giving up after {} attempts: {last}",
            self.config.max_attempts
        )))
    }

    fn attempt<R: DeserializeOwned>(&self, url: &str, key: &str, body: &[u8]) -> Result<StageResponse<R>, Attempt> {
        let mut resp = self
            .agent
            .post(url)
            .header("Content-Type", "application/json")
            .header("Idempotency-Key", key)
            .send(body)
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => serde_json::from_str(&text).map_err(|e| Attempt::Fatal(format!("malformed response: {e}"))),
            408 | 429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}"))),
            _ => Err(Attempt::Fatal(format!("HTTP {status}: {text}"))),
        }
    }

    fn mesh_payload(mesh: &TriMesh, views: &[RenderView]) -> MeshPayload {
        MeshPayload {
            mesh_obj: write_obj(mesh),
            views: views.iter().map(EncodedView::encode).collect(),
        }
    }
}

fn invalid(what: &str, err: impl std::fmt::Display) -> ClientError {
    ClientError::Transport(format!("invalid {what} response: {err}"))
}

impl AnnotationClient for RemoteClient {
    fn quality_gate(&self, ctx: AssetContext<'_>, mesh: &TriMesh, views: &[RenderView]) -> Result<GateResult, ClientError> {
        let gate: GateResult = self.call(Stage::QualityGate, ctx.asset_id, Self::mesh_payload(mesh, views))?;
        if !gate.is_consistent() {
            return Err(invalid("quality gate", "passed flag disagrees with reasons"));
        }
        Ok(gate)
    }

    fn estimate_properties(
        &self,
        ctx: AssetContext<'_>,
        mesh: &TriMesh,
        views: &[RenderView],
    ) -> Result<PropertyEstimate, ClientError> {
        let est: PropertyEstimate = self.call(Stage::EstimateProperties, ctx.asset_id, Self::mesh_payload(mesh, views))?;
        est.properties.validate().map_err(|e| invalid("property", e))?;
        Ok(est)
    }

    fn caption(&self, ctx: AssetContext<'_>, mesh: &TriMesh, views: &[RenderView]) -> Result<SemanticCaption, ClientError> {
        let caption: SemanticCaption = self.call(Stage::Caption, ctx.asset_id, Self::mesh_payload(mesh, views))?;
        caption.validate().map_err(|e| invalid("caption", e))?;
        Ok(caption)
    }

    fn select_points(
        &self,
        ctx: AssetContext<'_>,
        mesh: &TriMesh,
        candidates: &PointCloud,
        views: &[RenderView],
    ) -> Result<PointSelection, ClientError> {
        let payload = SelectPayload {
            mesh_obj: write_obj(mesh),
            candidates: candidates.clone(),
            views: views.iter().map(EncodedView::encode).collect(),
        };
        let selection: PointSelection = self.call(Stage::SelectPoints, ctx.asset_id, payload)?;
        selection.validate(candidates.len(), &self.config.bounds)?;
        Ok(selection)
    }

    fn propose_grasps(
        &self,
        ctx: AssetContext<'_>,
        cloud: &PointCloud,
        gripper: &GripperModel,
        max_n: usize,
        seed: u64,
    ) -> Result<Vec<GraspPose>, ClientError> {
        let payload = ProposePayload {
            cloud: cloud.clone(),
            gripper: gripper.clone(),
            max_n,
            seed,
        };
        let grasps: Vec<GraspPose> = self.call(Stage::ProposeGrasps, ctx.asset_id, payload)?;
        if grasps.len() > max_n {
            return Err(invalid("grasp", format!("{} proposals exceed limit {max_n}", grasps.len())));
        }
        for (i, g) in grasps.iter().enumerate() {
            g.validate().map_err(|e| invalid("grasp", format!("proposal {i}: {e}")))?;
        }
        Ok(grasps)
    }
}
