//! Human review service: a sampled queue of annotated assets, append-only
//! verdict storage and per-dimension accuracy, served as JSON under `/api/v1`.
//!
//! [`ReviewService::handle`] is a pure request/response function so the API
//! can be exercised without sockets; [`ReviewServer`] puts it behind HTTP.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::GraspPose;
use crate::pipeline::{is_valid_asset_id, Store, CANDIDATES_FILE, MANIFEST_FILE, VERDICTS_FILE};

/// Header carrying the reviewer id when the body omits it.
pub const REVIEWER_HEADER: &str = "X-Reviewer-Id";
pub const DEFAULT_PAGE_SIZE: usize = 20;
pub const MAX_PAGE_SIZE: usize = 200;
pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rating {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Accept,
    Reject,
}

/// One rating per annotation dimension. All five are required.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ratings {
    pub category_classification: Rating,
    pub language_descriptions: Rating,
    pub functional_point_labels: Rating,
    pub physical_property_estimation: Rating,
    pub grasp_point_selection: Rating,
}

impl Ratings {
    pub const DIMENSIONS: [&'static str; 5] = [
        "category_classification",
        "language_descriptions",
        "functional_point_labels",
        "physical_property_estimation",
        "grasp_point_selection",
    ];

    pub fn all(rating: Rating) -> Self {
        Ratings {
            category_classification: rating,
            language_descriptions: rating,
            functional_point_labels: rating,
            physical_property_estimation: rating,
            grasp_point_selection: rating,
        }
    }

    /// Ratings in [`Ratings::DIMENSIONS`] order.
    pub fn values(&self) -> [Rating; 5] {
        [
            self.category_classification,
            self.language_descriptions,
            self.functional_point_labels,
            self.physical_property_estimation,
            self.grasp_point_selection,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub asset_id: String,
    pub ratings: Ratings,
    pub overall: Overall,
    pub reviewer_id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReviewVerdict {
    pub fn validate(&self) -> Result<(), ReviewError> {
        if !is_valid_asset_id(&self.asset_id) {
            return Err(ReviewError::Validation(format!("invalid asset id `{}`", self.asset_id)));
        }
        if self.reviewer_id.trim().is_empty() {
            return Err(ReviewError::Validation("reviewer_id is empty".into()));
        }
        let has_note = self.note.as_deref().is_some_and(|n| !n.trim().is_empty());
        if self.overall == Overall::Reject && !has_note && !self.ratings.values().contains(&Rating::Incorrect) {
            return Err(ReviewError::Validation(
                "reject needs at least one incorrect rating or a note".into(),
            ));
        }
        Ok(())
    }
}

/// Request body for a verdict. The server fills in the timestamp when absent;
/// the reviewer id may come from the body or the [`REVIEWER_HEADER`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerdictSubmission {
    #[serde(default)]
    pub asset_id: Option<String>,
    pub ratings: Ratings,
    pub overall: Overall,
    #[serde(default)]
    pub reviewer_id: Option<String>,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReviewError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("reviewer `{reviewer_id}` already submitted a verdict for `{asset_id}`")]
    Conflict { asset_id: String, reviewer_id: String },
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("storage error: {0}")]
    Storage(String),
}

impl ReviewError {
    pub fn status(&self) -> u16 {
        match self {
            ReviewError::NotFound(_) => 404,
            ReviewError::Conflict { .. } => 409,
            ReviewError::Validation(_) => 400,
            ReviewError::Storage(_) => 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAccuracy {
    pub correct: u64,
    pub total: u64,
    /// `correct / total`, absent when there are no verdicts.
    pub accuracy: Option<f64>,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub verdicts: u64,
    pub dimensions: BTreeMap<String, DimensionAccuracy>,
    pub accepted: u64,
    pub accept_rate: Option<f64>,
}

fn ratio(num: u64, den: u64) -> (Option<f64>, Option<f64>) {
    if den == 0 {
        (None, None)
    } else {
        (Some(num as f64 / den as f64), Some((num * 100) as f64 / den as f64))
    }
}

/// Fraction of verdicts rating each dimension correct.
pub fn accuracy<'a>(verdicts: impl IntoIterator<Item = &'a ReviewVerdict>) -> AccuracyReport {
    let mut correct = [0u64; 5];
    let (mut total, mut accepted) = (0u64, 0u64);
    for v in verdicts {
        total += 1;
        accepted += (v.overall == Overall::Accept) as u64;
        for (c, r) in correct.iter_mut().zip(v.ratings.values()) {
            *c += (r == Rating::Correct) as u64;
        }
    }
    let dimensions = Ratings::DIMENSIONS
        .iter()
        .zip(correct)
        .map(|(name, c)| {
            let (accuracy, percent) = ratio(c, total);
            (
                name.to_string(),
                DimensionAccuracy {
                    correct: c,
                    total,
                    accuracy,
                    percent,
                },
            )
        })
        .collect();
    AccuracyReport {
        verdicts: total,
        dimensions,
        accepted,
        accept_rate: ratio(accepted, total).0,
    }
}

/// Deterministic membership of an asset in the review sample: the asset's
/// hash, read as a fraction of 2^64, falls below `rate`.
pub fn is_sampled(asset_id: &str, rate: f64) -> bool {
    if rate >= 1.0 {
        return true;
    }
    let digest = Sha256::digest(format!("review:{asset_id}").as_bytes());
    let u = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) as f64 / 2f64.powi(64);
    u < rate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub asset_id: String,
    pub thumbnail_url: Option<String>,
    pub stage_status: Option<String>,
    pub pending: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingPage {
    pub items: Vec<QueueItem>,
    /// 1-based.
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub total_pages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDetail {
    pub asset_id: String,
    pub stage_status: Option<String>,
    pub pending: bool,
    pub manifest: Option<serde_json::Value>,
    pub render_urls: Vec<String>,
    /// Every verified candidate with its outcome, passed or not.
    pub grasps: Vec<GraspPose>,
    pub verified_grasps: usize,
    pub verdicts: usize,
}

fn storage<E: std::fmt::Display>(e: E) -> ReviewError {
    ReviewError::Storage(e.to_string())
}

pub struct ReviewService {
    store: Store,
    sample_rate: f64,
    verdicts: RwLock<BTreeMap<String, Vec<ReviewVerdict>>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ReviewService {
    /// Loads every existing verdict file under `store`.
    pub fn open(store: Store, sample_rate: f64) -> Result<Self, ReviewError> {
        if !(0.0..=1.0).contains(&sample_rate) {
            return Err(ReviewError::Validation(format!("sample rate {sample_rate} outside [0, 1]")));
        }
        let mut verdicts = BTreeMap::new();
        for id in store.asset_ids().map_err(storage)? {
            let path = store.asset_file(&id, VERDICTS_FILE);
            let Ok(text) = std::fs::read_to_string(&path) else { continue };
            let mut list = Vec::new();
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let v: ReviewVerdict = serde_json::from_str(line)
                    .map_err(|e| ReviewError::Storage(format!("{}:{}: {e}", path.display(), n + 1)))?;
                list.push(v);
            }
            verdicts.insert(id, list);
        }
        Ok(ReviewService {
            store,
            sample_rate,
            verdicts: RwLock::new(verdicts),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn check_known(&self, id: &str) -> Result<(), ReviewError> {
        if is_valid_asset_id(id) && self.store.has_asset(id) {
            Ok(())
        } else {
            Err(ReviewError::NotFound(format!("asset `{id}`")))
        }
    }

    fn has_manifest(&self, id: &str) -> bool {
        self.store.asset_file(id, MANIFEST_FILE).is_file()
    }

    fn stage_status(&self, id: &str) -> Option<String> {
        let log = self.store.read_stage_log(id).ok()??;
        log.terminal_status().map(|s| s.as_str().to_string())
    }

    fn verdict_count(&self, id: &str) -> usize {
        self.verdicts.read().expect("verdict lock").get(id).map_or(0, Vec::len)
    }

    fn render_urls(&self, id: &str) -> Vec<String> {
        self.store
            .render_paths(id)
            .iter()
            .filter_map(|p| p.file_name()?.to_str().map(|f| format!("{API_PREFIX}/assets/{id}/renders/{f}")))
            .collect()
    }

    /// Annotated, sampled assets without any verdict, sorted by id.
    pub fn pending_ids(&self) -> Result<Vec<String>, ReviewError> {
        let ids = self.store.asset_ids().map_err(storage)?;
        let reviewed = self.verdicts.read().expect("verdict lock");
        Ok(ids
            .into_iter()
            .filter(|id| is_sampled(id, self.sample_rate) && self.has_manifest(id))
            .filter(|id| reviewed.get(id).map_or(true, Vec::is_empty))
            .collect())
    }

    pub fn pending(&self, page: usize, page_size: usize) -> Result<PendingPage, ReviewError> {
        if page == 0 {
            return Err(ReviewError::Validation("page is 1-based".into()));
        }
        if page_size == 0 || page_size > MAX_PAGE_SIZE {
            return Err(ReviewError::Validation(format!("page_size must be in 1..={MAX_PAGE_SIZE}")));
        }
        let ids = self.pending_ids()?;
        let total = ids.len();
        let items = ids
            .into_iter()
            .skip((page - 1) * page_size)
            .take(page_size)
            .map(|id| QueueItem {
                thumbnail_url: self.render_urls(&id).into_iter().next(),
                stage_status: self.stage_status(&id),
                pending: true,
                asset_id: id,
            })
            .collect();
        Ok(PendingPage {
            items,
            page,
            page_size,
            total,
            total_pages: total.div_ceil(page_size),
        })
    }

    pub fn asset_detail(&self, id: &str) -> Result<AssetDetail, ReviewError> {
        self.check_known(id)?;
        let read_json = |name: &str| -> Result<Option<String>, ReviewError> {
            match std::fs::read_to_string(self.store.asset_file(id, name)) {
                Ok(text) => Ok(Some(text)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(storage(e)),
            }
        };
        let manifest: Option<serde_json::Value> = read_json(MANIFEST_FILE)?
            .map(|t| serde_json::from_str(&t))
            .transpose()
            .map_err(storage)?;
        let grasps: Vec<GraspPose> = read_json(CANDIDATES_FILE)?
            .map(|t| serde_json::from_str(&t))
            .transpose()
            .map_err(storage)?
            .unwrap_or_default();
        let verified_grasps = grasps
            .iter()
            .filter(|g| g.verification.as_ref().is_some_and(|v| v.passed))
            .count();
        let verdicts = self.verdict_count(id);
        Ok(AssetDetail {
            asset_id: id.to_string(),
            stage_status: self.stage_status(id),
            pending: manifest.is_some() && is_sampled(id, self.sample_rate) && verdicts == 0,
            manifest,
            render_urls: self.render_urls(id),
            grasps,
            verified_grasps,
            verdicts,
        })
    }

    pub fn verdicts_for(&self, id: &str) -> Result<Vec<ReviewVerdict>, ReviewError> {
        self.check_known(id)?;
        Ok(self.verdicts.read().expect("verdict lock").get(id).cloned().unwrap_or_default())
    }

    /// Validates and appends a verdict. Writes to one asset are serialized;
    /// different assets proceed independently.
    pub fn submit(
        &self,
        asset_id: &str,
        submission: VerdictSubmission,
        header_reviewer: Option<&str>,
    ) -> Result<ReviewVerdict, ReviewError> {
        self.check_known(asset_id)?;
        if !self.has_manifest(asset_id) {
            return Err(ReviewError::NotFound(format!("asset `{asset_id}` has no manifest to review")));
        }
        if let Some(body_id) = &submission.asset_id {
            if body_id != asset_id {
                return Err(ReviewError::Validation(format!("asset_id `{body_id}` does not match `{asset_id}`")));
            }
        }
        let reviewer_id = match (submission.reviewer_id.as_deref(), header_reviewer) {
            (Some(a), Some(b)) if a != b => {
                return Err(ReviewError::Validation("reviewer_id differs from the reviewer header".into()))
            }
            (Some(a), _) | (None, Some(a)) => a.to_string(),
            (None, None) => return Err(ReviewError::Validation("missing reviewer_id".into())),
        };
        let verdict = ReviewVerdict {
            asset_id: asset_id.to_string(),
            ratings: submission.ratings,
            overall: submission.overall,
            reviewer_id,
            timestamp: submission.timestamp.unwrap_or_else(Utc::now),
            note: submission.note,
        };
        verdict.validate()?;

        let lock = self.locks.lock().expect("lock table").entry(asset_id.to_string()).or_default().clone();
        let _guard = lock.lock().expect("asset lock");
        let duplicate = self
            .verdicts
            .read()
            .expect("verdict lock")
            .get(asset_id)
            .is_some_and(|list| list.iter().any(|v| v.reviewer_id == verdict.reviewer_id));
        if duplicate {
            return Err(ReviewError::Conflict {
                asset_id: asset_id.to_string(),
                reviewer_id: verdict.reviewer_id,
            });
        }
        let mut line = serde_json::to_string(&verdict).expect("verdicts serialize");
        line.push('\n');
        let path = self.store.asset_file(asset_id, VERDICTS_FILE);
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(storage)?;
        file.write_all(line.as_bytes()).map_err(storage)?;
        file.sync_data().map_err(storage)?;
        self.verdicts
            .write()
            .expect("verdict lock")
            .entry(asset_id.to_string())
            .or_default()
            .push(verdict.clone());
        Ok(verdict)
    }

    /// Accuracy over every stored verdict, read under one lock.
    pub fn accuracy(&self) -> AccuracyReport {
        let all = self.verdicts.read().expect("verdict lock");
        accuracy(all.values().flatten())
    }

    /// Routes one API request.
    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        match self.route(req) {
            Ok(resp) => resp,
            Err(e) => ApiResponse::error(e.status(), &e.to_string()),
        }
    }

    fn route(&self, req: &ApiRequest) -> Result<ApiResponse, ReviewError> {
        let (path, query) = req.url.split_once('?').unwrap_or((&req.url, ""));
        let Some(rest) = path.strip_prefix(API_PREFIX) else {
            return Err(ReviewError::NotFound(format!("route `{path}`")));
        };
        let segments: Vec<&str> = rest.split('/').filter(|s| !s.is_empty()).collect();
        let method = req.method.to_ascii_uppercase();
        let allow = |expected: &str| {
            if method == expected {
                Ok(())
            } else {
                Err(ApiResponse::error(405, &format!("method {method} not allowed")))
            }
        };
        macro_rules! only {
            ($m:expr) => {
                if let Err(resp) = allow($m) {
                    return Ok(resp);
                }
            };
        }
        match segments.as_slice() {
            ["health"] => {
                only!("GET");
                Ok(ApiResponse::json(200, &serde_json::json!({ "status": "ok" })))
            }
            ["pending"] => {
                only!("GET");
                let params = parse_query(query);
                let num = |key: &str, default: usize| -> Result<usize, ReviewError> {
                    params.get(key).map_or(Ok(default), |v| {
                        v.parse().map_err(|_| ReviewError::Validation(format!("{key} must be a non-negative integer")))
                    })
                };
                let page = self.pending(num("page", 1)?, num("page_size", DEFAULT_PAGE_SIZE)?)?;
                Ok(ApiResponse::json(200, &page))
            }
            ["accuracy"] => {
                only!("GET");
                Ok(ApiResponse::json(200, &self.accuracy()))
            }
            ["assets", id] => {
                only!("GET");
                Ok(ApiResponse::json(200, &self.asset_detail(id)?))
            }
            ["assets", id, "renders", file] => {
                only!("GET");
                self.check_known(id)?;
                let path = self
                    .store
                    .render_paths(id)
                    .into_iter()
                    .find(|p| p.file_name().and_then(|f| f.to_str()) == Some(*file))
                    .ok_or_else(|| ReviewError::NotFound(format!("render `{file}`")))?;
                let bytes = std::fs::read(path).map_err(storage)?;
                Ok(ApiResponse {
                    status: 200,
                    content_type: "image/png",
                    body: bytes,
                })
            }
            ["assets", id, "verdicts"] => match method.as_str() {
                "GET" => Ok(ApiResponse::json(200, &self.verdicts_for(id)?)),
                "POST" => {
                    self.check_known(id)?;
                    let submission: VerdictSubmission = serde_json::from_slice(&req.body)
                        .map_err(|e| ReviewError::Validation(format!("malformed verdict: {e}")))?;
                    let verdict = self.submit(id, submission, req.reviewer.as_deref())?;
                    Ok(ApiResponse::json(201, &verdict))
                }
                _ => Ok(ApiResponse::error(405, &format!("method {method} not allowed"))),
            },
            _ => Err(ReviewError::NotFound(format!("route `{path}`"))),
        }
    }
}

fn parse_query(query: &str) -> HashMap<&str, &str> {
    query
        .split('&')
        .filter(|kv| !kv.is_empty())
        .map(|kv| kv.split_once('=').unwrap_or((kv, "")))
        .collect()
}

#[derive(Debug, Clone)]
pub struct ApiRequest {
    pub method: String,
    /// Path plus optional query string.
    pub url: String,
    pub reviewer: Option<String>,
    pub body: Vec<u8>,
}

impl ApiRequest {
    pub fn get(url: &str) -> Self {
        ApiRequest {
            method: "GET".into(),
            url: url.into(),
            reviewer: None,
            body: Vec::new(),
        }
    }

    pub fn post(url: &str, body: impl Into<Vec<u8>>) -> Self {
        ApiRequest {
            method: "POST".into(),
            url: url.into(),
            reviewer: None,
            body: body.into(),
        }
    }

    pub fn with_reviewer(mut self, reviewer: &str) -> Self {
        self.reviewer = Some(reviewer.into());
        self
    }
}

#[derive(Debug, Clone)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
}

impl ApiResponse {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        ApiResponse {
            status,
            content_type: "application/json",
            body: serde_json::to_vec_pretty(value).expect("responses serialize"),
        }
    }

    fn error(status: u16, message: &str) -> Self {
        Self::json(status, &serde_json::json!({ "status": status, "error": message }))
    }

    pub fn json_body(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or(serde_json::Value::Null)
    }
}

/// HTTP front end for a [`ReviewService`]; stops on drop.
pub struct ReviewServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl ReviewServer {
    pub fn start(service: Arc<ReviewService>, addr: &str, workers: usize) -> std::io::Result<Self> {
        let server = Arc::new(tiny_http::Server::http(addr).map_err(std::io::Error::other)?);
        let local = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let service = Arc::clone(&service);
                std::thread::spawn(move || {
                    while let Ok(request) = server.recv() {
                        respond(&service, request);
                    }
                })
            })
            .collect();
        Ok(ReviewServer {
            server,
            addr: local,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until every worker exits.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ReviewServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn respond(service: &ReviewService, mut request: tiny_http::Request) {
    let mut body = Vec::new();
    let response = match request.as_reader().read_to_end(&mut body) {
        Ok(_) => {
            let reviewer = request
                .headers()
                .iter()
                .find(|h| h.field.equiv(REVIEWER_HEADER))
                .map(|h| h.value.as_str().to_string());
            service.handle(&ApiRequest {
                method: request.method().as_str().to_string(),
                url: request.url().to_string(),
                reviewer,
                body,
            })
        }
        Err(e) => ApiResponse::error(400, &format!("unreadable body: {e}")),
    };
    let header = tiny_http::Header::from_bytes("Content-Type", response.content_type).expect("static header");
    let reply = tiny_http::Response::from_data(response.body)
        .with_status_code(response.status)
        .with_header(header);
    if let Err(e) = request.respond(reply) {
        log::warn!("failed to send response: {e}");
    }
}
