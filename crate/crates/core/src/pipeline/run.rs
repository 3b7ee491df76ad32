use std::fmt::Display;
use std::path::Path;
use std::sync::Arc;

use chrono::Utc;
use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::store::{io_err, StageEntry, StageLog, StageStatus, Store};
use super::store::{CANDIDATES_FILE, MANIFEST_FILE, MESH_FILE, RENDERS_DIR, SOURCE_FILE};
use super::{asset_seed, stage_seed, store_stats, ClientMode, PipelineConfig, PipelineError};
use crate::clients::{
    AnnotationClient, AssetContext, FixtureEntry, FixtureTable, GateReason, MockClient, MockConfig, RemoteClient,
    RemoteConfig,
};
use crate::geometry::{
    farthest_from_centroid, farthest_point_sampling, load_mesh, placement_annotation, render_views, rescale_to_dims,
    surface_sample, write_obj,
};
use crate::grasp::{associate_semantics, fps_7dof, proximity_filter, verify_grasp, VerifyConfig};
use crate::model::{
    load_manifest, save_manifest, write_atomic, AssetRecord, GraspCounts, GraspPose, GripperModel, PipelineStats,
    Provenance, ProvenanceStage,
};

/// Pipeline stages in execution order.
pub const STAGES: [&str; 15] = [
    "load",
    "rescale",
    "render",
    "quality_gate",
    "properties",
    "caption",
    "sample",
    "fps",
    "select_points",
    "propose_grasps",
    "proximity_filter",
    "fps_7dof",
    "associate",
    "verify",
    "consolidate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AssetStatus {
    Annotated,
    Filtered { reasons: Vec<GateReason> },
    Error { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetOutcome {
    pub asset_id: String,
    pub status: AssetStatus,
    pub counts: GraspCounts,
    /// Nothing was re-executed because the stage log matched.
    pub skipped: bool,
    pub stage_executions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub outcomes: Vec<AssetOutcome>,
    pub stats: PipelineStats,
}

pub fn build_client(config: &PipelineConfig, fixtures: FixtureTable) -> Result<Arc<dyn AnnotationClient>, PipelineError> {
    Ok(match config.clients {
        ClientMode::Mock => Arc::new(MockClient {
            fixtures,
            config: MockConfig {
                bounds: config.bounds,
                ..MockConfig::default()
            },
        }),
        ClientMode::Remote => {
            let endpoint = config
                .endpoint
                .clone()
                .ok_or_else(|| PipelineError::Config("remote clients need an endpoint".into()))?;
            let mut remote = RemoteConfig::new(endpoint);
            remote.bounds = config.bounds;
            Arc::new(RemoteClient::new(remote))
        }
    })
}

/// Copies every `*.obj` in `dir` into the store, named by file stem, and
/// merges an optional fixture table. Returns the ingested ids.
pub fn ingest_dir(store: &Store, dir: &Path, fixtures: Option<&Path>) -> Result<Vec<String>, PipelineError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj")))
        .collect();
    files.sort();
    let mut ids = Vec::new();
    for path in files {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        store.add_source(&id, &bytes)?;
        ids.push(id);
    }
    if let Some(path) = fixtures {
        let extra = FixtureTable::load(path).map_err(io_err(path))?;
        let mut table = store.load_fixtures()?;
        table.0.extend(extra.0);
        store.save_fixtures(&table)?;
    }
    Ok(ids)
}

fn stage_params(config: &PipelineConfig, fixture: Option<&FixtureEntry>, stage: &str) -> serde_json::Value {
    let client = json!({ "mode": config.clients, "endpoint": config.endpoint });
    match stage {
        "rescale" => json!({ "target": fixture.and_then(|f| f.longest_axis_m) }),
        "render" => json!({ "views": config.views, "size": config.render_size }),
        "quality_gate" | "properties" | "caption" => json!({ "client": client }),
        "sample" => json!({ "n": config.surface_samples }),
        "fps" => json!({ "k": config.fps_k }),
        "select_points" => json!({ "client": client, "bounds": config.bounds }),
        "propose_grasps" => json!({ "client": client, "max_n": config.max_proposals, "gripper": config.gripper }),
        "proximity_filter" => json!({ "threshold": config.proximity_threshold }),
        "fps_7dof" => json!({ "k": config.grasp_k, "rotation_weight": config.rotation_weight }),
        "verify" => json!({ "gripper": config.gripper, "verify": config.verify }),
        "consolidate" => json!({ "up_axis": config.up_axis }),
        _ => json!({}),
    }
}

/// Hash chain over the stages: each hash covers the inputs, the asset seed and
/// the parameters of every stage up to and including its own.
fn stage_hashes(config: &PipelineConfig, source: &[u8], fixture: Option<&FixtureEntry>, seed: u64) -> Vec<String> {
    let mut prev = Sha256::new()
        .chain_update(env!("CARGO_PKG_VERSION").as_bytes())
        .chain_update(Sha256::digest(source))
        .chain_update(serde_json::to_vec(&fixture).expect("fixtures serialize"))
        .chain_update(seed.to_le_bytes())
        .finalize();
    STAGES
        .iter()
        .map(|stage| {
            prev = Sha256::new()
                .chain_update(prev)
                .chain_update(stage.as_bytes())
                .chain_update(serde_json::to_vec(&stage_params(config, fixture, stage)).expect("params serialize"))
                .finalize();
            hex::encode(prev)
        })
        .collect()
}

struct StageRun<'a> {
    hashes: &'a [String],
    entries: Vec<StageEntry>,
}

/// Why processing stopped before consolidation.
enum Stop {
    Filtered(Vec<GateReason>),
    Failed(String),
    Store(PipelineError),
}

impl From<PipelineError> for Stop {
    fn from(e: PipelineError) -> Self {
        Stop::Store(e)
    }
}

impl StageRun<'_> {
    fn record(&mut self, status: StageStatus, message: Option<String>) {
        let i = self.entries.len();
        self.entries.push(StageEntry {
            stage: STAGES[i].to_string(),
            status,
            timestamp: Utc::now(),
            params_hash: self.hashes[i].clone(),
            message,
        });
    }

    fn step<T, E: Display>(&mut self, result: Result<T, E>) -> Result<T, Stop> {
        match result {
            Ok(v) => {
                self.record(StageStatus::Ok, None);
                Ok(v)
            }
            Err(e) => {
                let message = e.to_string();
                self.record(StageStatus::Error, Some(message.clone()));
                Err(Stop::Failed(message))
            }
        }
    }

    fn current(&self) -> &'static str {
        STAGES[self.entries.len().min(STAGES.len() - 1)]
    }
}

fn reasons_text(reasons: &[GateReason]) -> String {
    serde_json::to_string(reasons).expect("gate reasons serialize")
}

fn previous_outcome(store: &Store, id: &str, hashes: &[String]) -> Result<Option<AssetOutcome>, PipelineError> {
    let Some(log) = store.read_stage_log(id)? else {
        return Ok(None);
    };
    if log.entries.is_empty()
        || !log.is_well_ordered(&STAGES)
        || log.entries.iter().zip(hashes).any(|(e, h)| &e.params_hash != h)
    {
        return Ok(None);
    }
    let last = log.entries.last().expect("checked non-empty");
    match last.status {
        StageStatus::Ok if log.entries.len() == STAGES.len() => {
            let path = store.asset_file(id, MANIFEST_FILE);
            if !path.is_file() {
                return Ok(None);
            }
            let record = load_manifest(&path)?;
            Ok(Some(AssetOutcome {
                asset_id: id.to_string(),
                status: AssetStatus::Annotated,
                counts: record.provenance.grasp_counts,
                skipped: true,
                stage_executions: 0,
            }))
        }
        StageStatus::Filtered => {
            let reasons = last
                .message
                .as_deref()
                .and_then(|m| serde_json::from_str(m).ok())
                .unwrap_or_default();
            Ok(Some(AssetOutcome {
                asset_id: id.to_string(),
                status: AssetStatus::Filtered { reasons },
                counts: GraspCounts::default(),
                skipped: true,
                stage_executions: 0,
            }))
        }
        _ => Ok(None),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    write_atomic(path, text.as_bytes()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("values serialize") + "\n"))
}

fn verify_all(
    mesh: &crate::model::TriMesh,
    physical: &crate::model::PhysicalProperties,
    grasps: Vec<GraspPose>,
    gripper: &GripperModel,
    config: &VerifyConfig,
) -> Result<Vec<GraspPose>, crate::grasp::VerifyError> {
    grasps
        .into_par_iter()
        .map(|mut g| {
            g.verification = Some(verify_grasp(mesh, physical, &g, gripper, config)?);
            Ok(g)
        })
        .collect()
}

fn passed(grasps: &[GraspPose]) -> Vec<GraspPose> {
    grasps
        .iter()
        .filter(|g| g.verification.as_ref().is_some_and(|v| v.passed))
        .cloned()
        .collect()
}

fn execute(
    store: &Store,
    config: &PipelineConfig,
    client: &dyn AnnotationClient,
    id: &str,
    source: Result<Vec<u8>, std::io::Error>,
    fixture: Option<&FixtureEntry>,
    seed: u64,
    run: &mut StageRun<'_>,
    counts: &mut GraspCounts,
) -> Result<(), Stop> {
    let ctx = AssetContext { asset_id: id };
    let mut mesh = run.step(
        source
            .map_err(|e| format!("cannot read source: {e}"))
            .and_then(|bytes| load_mesh(&bytes).map_err(|e| e.to_string())),
    )?;

    let mut notes = Vec::new();
    let scale_factor = match fixture.and_then(|f| f.longest_axis_m) {
        Some(target) => {
            let (scaled, factor) = run.step(rescale_to_dims(&mesh, target))?;
            mesh = scaled;
            factor
        }
        None => {
            notes.push("no real-world size available; mesh kept at source scale".to_string());
            run.step(Ok::<_, String>(()))?;
            1.0
        }
    };
    write_text(&store.asset_file(id, MESH_FILE), &write_obj(&mesh))?;

    let views = run.step(render_views(&mesh, config.views, config.render_size, config.render_size))?;
    let renders = store.asset_dir(id).join(RENDERS_DIR);
    if renders.exists() {
        std::fs::remove_dir_all(&renders).map_err(io_err(&renders))?;
    }
    std::fs::create_dir_all(&renders).map_err(io_err(&renders))?;
    for view in &views {
        let path = store.render_path(id, view.view_index);
        view.save_png(&path).map_err(io_err(&path))?;
    }

    let gate = run.step(client.quality_gate(ctx, &mesh, &views))?;
    if !gate.passed {
        run.entries.pop();
        run.record(StageStatus::Filtered, Some(reasons_text(&gate.reasons)));
        return Err(Stop::Filtered(gate.reasons));
    }
    let estimate = run.step(client.estimate_properties(ctx, &mesh, &views))?;
    if estimate.volume_fallback {
        notes.push("mesh encloses no volume; mass from box volume times fill factor".to_string());
    }
    let caption = run.step(client.caption(ctx, &mesh, &views))?;

    let cloud = run.step(surface_sample(&mesh, config.surface_samples, stage_seed(seed, "sample")))?;
    let fps_seed = farthest_from_centroid(cloud.points()).unwrap_or(0);
    let candidate_idx = run.step(farthest_point_sampling(&cloud, config.fps_k.min(cloud.len()), fps_seed))?;
    let candidates = cloud.select(&candidate_idx);

    let selection = run.step(
        client
            .select_points(ctx, &mesh, &candidates, &views)
            .and_then(|s| s.validate(candidates.len(), &config.bounds).map(|_| s)),
    )?;

    let raw = run.step(client.propose_grasps(
        ctx,
        &cloud,
        &config.gripper,
        config.max_proposals,
        stage_seed(seed, "propose_grasps"),
    ))?;
    counts.raw_proposals = raw.len() as u64;

    let anchors: Vec<Point3<f64>> = selection
        .functional_points
        .iter()
        .map(|p| p.position)
        .chain(selection.grasp_points.iter().map(|p| p.position))
        .collect();
    let near = run.step(proximity_filter(&raw, &anchors, config.proximity_threshold))?;
    counts.after_proximity = near.len() as u64;

    let diverse = if near.is_empty() {
        run.step(Ok::<_, String>(Vec::new()))?
    } else {
        run.step(fps_7dof(&near, config.grasp_k, config.rotation_weight))?
    };
    counts.candidates = diverse.len() as u64;

    let associated = run.step(associate_semantics(&diverse, &selection.functional_points, &selection.grasp_points))?;

    let verified_all = run.step(verify_all(
        &mesh,
        &estimate.properties,
        associated,
        &config.gripper,
        &config.verify,
    ))?;
    write_json(&store.asset_file(id, CANDIDATES_FILE), &verified_all)?;
    let verified = passed(&verified_all);
    counts.verified = verified.len() as u64;

    let placement = run.step(placement_annotation(&mesh, config.up_axis))?;
    run.entries.pop();
    notes.push("collision circle centered on the projected vertex centroid".to_string());
    notes.push("grasps verified by the quasi-static check, not a dynamics engine".to_string());

    let mut stages: Vec<ProvenanceStage> = run
        .entries
        .iter()
        .map(|e| ProvenanceStage {
            stage: e.stage.clone(),
            status: e.status.as_str().to_string(),
            params_hash: e.params_hash.clone(),
        })
        .collect();
    stages.push(ProvenanceStage {
        stage: "consolidate".into(),
        status: "ok".into(),
        params_hash: run.hashes[STAGES.len() - 1].clone(),
    });
    let record = AssetRecord {
        asset_id: id.to_string(),
        mesh_ref: MESH_FILE.to_string(),
        physical: estimate.properties,
        caption,
        functional_points: selection.functional_points,
        grasp_points: selection.grasp_points,
        verified_grasps: verified,
        placement,
        provenance: Provenance {
            stages,
            grasp_counts: *counts,
            scale_factor,
            notes,
        },
        extra: Default::default(),
    };
    run.step(save_manifest(&record, &store.asset_file(id, MANIFEST_FILE)))?;
    Ok(())
}

fn process_asset(
    store: &Store,
    config: &PipelineConfig,
    client: &dyn AnnotationClient,
    fixtures: &FixtureTable,
    id: &str,
) -> Result<AssetOutcome, PipelineError> {
    let source_path = store.asset_file(id, SOURCE_FILE);
    let source = std::fs::read(&source_path);
    let fixture = fixtures.get(id);
    let seed = asset_seed(config.seed, id);
    let hashes = stage_hashes(config, source.as_deref().unwrap_or_default(), fixture, seed);
    if source.is_ok() {
        if let Some(previous) = previous_outcome(store, id, &hashes)? {
            return Ok(previous);
        }
    }

    let mut run = StageRun {
        hashes: &hashes,
        entries: Vec::new(),
    };
    let mut counts = GraspCounts::default();
    let result = execute(store, config, client, id, source, fixture, seed, &mut run, &mut counts);
    let status = match result {
        Ok(()) => AssetStatus::Annotated,
        Err(Stop::Filtered(reasons)) => AssetStatus::Filtered { reasons },
        Err(Stop::Failed(message)) => AssetStatus::Error {
            stage: run.entries.last().map_or_else(|| run.current().to_string(), |e| e.stage.clone()),
            message,
        },
        Err(Stop::Store(e)) => return Err(e),
    };
    if status != AssetStatus::Annotated {
        store.remove_if_present(id, MANIFEST_FILE)?;
        if matches!(status, AssetStatus::Filtered { .. }) {
            store.remove_if_present(id, CANDIDATES_FILE)?;
        }
    }
    let executions = run.entries.len() as u64;
    store.write_stage_log(&StageLog {
        asset_id: id.to_string(),
        entries: run.entries,
    })?;
    Ok(AssetOutcome {
        asset_id: id.to_string(),
        status,
        counts,
        skipped: false,
        stage_executions: executions,
    })
}

/// Processes every ingested asset with the configured clients.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let store = Store::create(&config.store)?;
    let client = build_client(config, store.load_fixtures()?)?;
    run_pipeline_with(config, client.as_ref())
}

/// [`run_pipeline`] with a caller-supplied client.
pub fn run_pipeline_with(config: &PipelineConfig, client: &dyn AnnotationClient) -> Result<RunReport, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let store = Store::create(&config.store)?;
    let fixtures = store.load_fixtures()?;
    let ids = store.asset_ids()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let outcomes = pool.install(|| {
        ids.par_iter()
            .map(|id| {
                let outcome = process_asset(&store, config, client, &fixtures, id);
                if let Ok(o) = &outcome {
                    log::info!("{}: {:?} ({} stages run)", o.asset_id, o.status, o.stage_executions);
                }
                outcome
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut stats = store_stats(&store)?;
    stats.stage_executions = outcomes.iter().map(|o| o.stage_executions).sum();
    write_json(&store.stats_path(), &stats)?;
    Ok(RunReport { outcomes, stats })
}

/// Re-runs verification for the grasps in `candidates_path` against the
/// manifest's mesh and physics, and rewrites the manifest with the result.
pub fn reverify_asset(
    manifest_path: &Path,
    candidates_path: &Path,
    gripper: &GripperModel,
    config: &VerifyConfig,
) -> Result<AssetRecord, PipelineError> {
    gripper.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut record = load_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mesh_path = dir.join(&record.mesh_ref);
    let bytes = std::fs::read(&mesh_path).map_err(io_err(&mesh_path))?;
    let mesh = load_mesh(&bytes).map_err(|e| PipelineError::Stage(format!("{}: {e}", mesh_path.display())))?;
    let text = std::fs::read_to_string(candidates_path).map_err(io_err(candidates_path))?;
    let grasps: Vec<GraspPose> = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Corrupt(format!("{}: {e}", candidates_path.display())))?;
    let grasps = if record.functional_points.is_empty() && record.grasp_points.is_empty() {
        grasps
    } else {
        associate_semantics(&grasps, &record.functional_points, &record.grasp_points)
            .map_err(|e| PipelineError::Stage(e.to_string()))?
    };
    let outcomes = verify_all(&mesh, &record.physical, grasps, gripper, config)
        .map_err(|e| PipelineError::Stage(e.to_string()))?;
    write_json(candidates_path, &outcomes)?;
    record.verified_grasps = passed(&outcomes);
    record.provenance.grasp_counts.candidates = outcomes.len() as u64;
    record.provenance.grasp_counts.verified = record.verified_grasps.len() as u64;
    let note = format!(
        "re-verified: mu {}, squeeze {} N, displacement threshold {} m",
        config.mu.map_or_else(|| "from asset".to_string(), |m| m.to_string()),
        config.squeeze_force.unwrap_or(gripper.squeeze_force),
        config.displacement_threshold
    );
    record.provenance.notes.push(note);
    save_manifest(&record, manifest_path)?;
    Ok(record)
}
