//! Local stand-in for the remote annotation service, backed by any
//! [`AnnotationClient`]. Used by contract tests and offline demos.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::messages::{MeshPayload, ProposePayload, SelectPayload, Stage, StageRequest, StageResponse};
use super::{AnnotationClient, AssetContext, ClientError};
use crate::geometry::{load_mesh, RenderView};

/// Fault injection knobs.
#[derive(Debug, Default)]
pub struct StubBehavior {
    /// Answer this many requests with HTTP 503 before serving normally.
    pub fail_first: AtomicUsize,
    /// Remove this key from every response object.
    pub drop_field: Mutex<Option<String>>,
    pub delay: Mutex<Option<Duration>>,
}

pub struct StubServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    worker: Option<JoinHandle<()>>,
    pub behavior: Arc<StubBehavior>,
    served: Arc<Mutex<Vec<String>>>,
}

impl StubServer {
    pub fn start(backend: Arc<dyn AnnotationClient>) -> std::io::Result<Self> {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").map_err(std::io::Error::other)?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub server is not bound to an IP address"))?;
        let behavior = Arc::new(StubBehavior::default());
        let served = Arc::new(Mutex::new(Vec::new()));
        let worker = {
            let server = Arc::clone(&server);
            let behavior = Arc::clone(&behavior);
            let served = Arc::clone(&served);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    handle(request, backend.as_ref(), &behavior, &served);
                }
            })
        };
        Ok(StubServer {
            addr,
            server,
            worker: Some(worker),
            behavior,
            served,
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Idempotency keys of every request received, in arrival order.
    pub fn served_keys(&self) -> Vec<String> {
        self.served.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

fn respond(request: tiny_http::Request, status: u16, body: String) {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    let _ = request.respond(tiny_http::Response::from_string(body).with_status_code(status).with_header(header));
}

fn handle(
    mut request: tiny_http::Request,
    backend: &dyn AnnotationClient,
    behavior: &StubBehavior,
    served: &Mutex<Vec<String>>,
) {
    let key = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Idempotency-Key"))
        .map(|h| h.value.to_string())
        .unwrap_or_default();
    served.lock().unwrap_or_else(|e| e.into_inner()).push(key);

    if let Some(delay) = *behavior.delay.lock().unwrap_or_else(|e| e.into_inner()) {
        std::thread::sleep(delay);
    }
    if behavior
        .fail_first
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        respond(request, 503, r#"{"error":"unavailable"}"#.into());
        return;
    }

    let stage = request
        .url()
        .strip_prefix("/v1/stages/")
        .and_then(Stage::parse);
    let Some(stage) = stage else {
        respond(request, 404, r#"{"error":"unknown stage"}"#.into());
        return;
    };
    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        respond(request, 400, r#"{"error":"unreadable body"}"#.into());
        return;
    }
    match dispatch(stage, &body, backend) {
        Ok(mut value) => {
            if let Some(field) = behavior.drop_field.lock().unwrap_or_else(|e| e.into_inner()).as_deref() {
                if let Some(obj) = value.get_mut("response").and_then(|r| r.as_object_mut()) {
                    obj.remove(field);
                }
            }
            respond(request, 200, value.to_string());
        }
        Err((status, msg)) => respond(request, status, serde_json::json!({ "error": msg }).to_string()),
    }
}

fn parse<P: DeserializeOwned>(body: &str) -> Result<StageRequest<P>, (u16, String)> {
    serde_json::from_str(body).map_err(|e| (400, format!("malformed request: {e}")))
}

fn answer<R: Serialize>(stage: Stage, asset_id: String, result: Result<R, ClientError>) -> Result<serde_json::Value, (u16, String)> {
    let response = result.map_err(|e| (422, e.to_string()))?;
    Ok(serde_json::to_value(StageResponse {
        stage,
        asset_id,
        response,
    })
    .expect("responses serialize"))
}

fn decode_mesh_views(payload: &MeshPayload) -> Result<(crate::model::TriMesh, Vec<RenderView>), (u16, String)> {
    let mesh = load_mesh(payload.mesh_obj.as_bytes()).map_err(|e| (400, e.to_string()))?;
    let views = payload
        .views
        .iter()
        .map(|v| v.decode())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| (400, e))?;
    Ok((mesh, views))
}

fn dispatch(stage: Stage, body: &str, backend: &dyn AnnotationClient) -> Result<serde_json::Value, (u16, String)> {
    match stage {
        Stage::QualityGate | Stage::EstimateProperties | Stage::Caption => {
            let req: StageRequest<MeshPayload> = parse(body)?;
            let (mesh, views) = decode_mesh_views(&req.payload)?;
            let ctx = AssetContext { asset_id: &req.asset_id };
            match stage {
                Stage::QualityGate => answer(stage, req.asset_id.clone(), backend.quality_gate(ctx, &mesh, &views)),
                Stage::EstimateProperties => {
                    answer(stage, req.asset_id.clone(), backend.estimate_properties(ctx, &mesh, &views))
                }
                _ => answer(stage, req.asset_id.clone(), backend.caption(ctx, &mesh, &views)),
            }
        }
        Stage::SelectPoints => {
            let req: StageRequest<SelectPayload> = parse(body)?;
            let mesh = load_mesh(req.payload.mesh_obj.as_bytes()).map_err(|e| (400, e.to_string()))?;
            let views = req
                .payload
                .views
                .iter()
                .map(|v| v.decode())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| (400, e))?;
            let ctx = AssetContext { asset_id: &req.asset_id };
            let result = backend.select_points(ctx, &mesh, &req.payload.candidates, &views);
            answer(stage, req.asset_id.clone(), result)
        }
        Stage::ProposeGrasps => {
            let req: StageRequest<ProposePayload> = parse(body)?;
            let ctx = AssetContext { asset_id: &req.asset_id };
            let p = &req.payload;
            let result = backend.propose_grasps(ctx, &p.cloud, &p.gripper, p.max_n, p.seed);
            answer(stage, req.asset_id.clone(), result)
        }
    }
}
