//! On-disk layout shared by the pipeline and the review service:
//!
//! ```text
//! <root>/fixtures.json
//! <root>/stats.json
//! <root>/assets/<id>/source.obj        as ingested
//! <root>/assets/<id>/mesh.obj          rescaled
//! <root>/assets/<id>/manifest.json
//! <root>/assets/<id>/candidates.json   every verified candidate with its outcome
//! <root>/assets/<id>/stage_log.json
//! <root>/assets/<id>/renders/view_XX.png
//! <root>/assets/<id>/verdicts.jsonl
//! ```

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::clients::FixtureTable;
use crate::model::write_atomic;

pub const SOURCE_FILE: &str = "source.obj";
pub const MESH_FILE: &str = "mesh.obj";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CANDIDATES_FILE: &str = "candidates.json";
pub const STAGE_LOG_FILE: &str = "stage_log.json";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const RENDERS_DIR: &str = "renders";

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Asset ids become directory names, so they are restricted to a safe alphabet.
pub fn is_valid_asset_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let store = Self::open(root);
        let assets = store.root.join("assets");
        std::fs::create_dir_all(&assets).map_err(io_err(&assets))?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn asset_dir(&self, id: &str) -> PathBuf {
        self.root.join("assets").join(id)
    }

    pub fn asset_file(&self, id: &str, name: &str) -> PathBuf {
        self.asset_dir(id).join(name)
    }

    pub fn render_path(&self, id: &str, view: usize) -> PathBuf {
        self.asset_dir(id).join(RENDERS_DIR).join(format!("view_{view:02}.png"))
    }

    pub fn render_paths(&self, id: &str) -> Vec<PathBuf> {
        let dir = self.asset_dir(id).join(RENDERS_DIR);
        let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "png"))
            .collect();
        out.sort();
        out
    }

    pub fn fixtures_path(&self) -> PathBuf {
        self.root.join("fixtures.json")
    }

    pub fn stats_path(&self) -> PathBuf {
        self.root.join("stats.json")
    }

    /// Ids of every ingested asset, sorted.
    pub fn asset_ids(&self) -> Result<Vec<String>, PipelineError> {
        let dir = self.root.join("assets");
        let entries = match std::fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&dir)(e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if is_valid_asset_id(&name) && entry.path().join(SOURCE_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Manifests of every annotated asset, sorted by id.
    pub fn load_records(&self) -> Result<Vec<crate::model::AssetRecord>, PipelineError> {
        let mut out = Vec::new();
        for id in self.asset_ids()? {
            let path = self.asset_file(&id, MANIFEST_FILE);
            if path.is_file() {
                out.push(crate::model::load_manifest(&path)?);
            }
        }
        Ok(out)
    }

    pub fn has_asset(&self, id: &str) -> bool {
        is_valid_asset_id(id) && self.asset_file(id, SOURCE_FILE).is_file()
    }

    pub fn load_fixtures(&self) -> Result<FixtureTable, PipelineError> {
        let path = self.fixtures_path();
        if !path.exists() {
            return Ok(FixtureTable::default());
        }
        FixtureTable::load(&path).map_err(io_err(&path))
    }

    pub fn save_fixtures(&self, table: &FixtureTable) -> Result<(), PipelineError> {
        let path = self.fixtures_path();
        table.save(&path).map_err(io_err(&path))
    }

    /// Copies OBJ bytes in as a new (or replaced) asset source.
    pub fn add_source(&self, id: &str, obj: &[u8]) -> Result<(), PipelineError> {
        if !is_valid_asset_id(id) {
            return Err(PipelineError::Config(format!("`{id}` is not a usable asset id")));
        }
        let dir = self.asset_dir(id);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(SOURCE_FILE);
        write_atomic(&path, obj).map_err(io_err(&path))
    }

    pub fn read_stage_log(&self, id: &str) -> Result<Option<StageLog>, PipelineError> {
        let path = self.asset_file(id, STAGE_LOG_FILE);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| PipelineError::Corrupt(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn write_stage_log(&self, log: &StageLog) -> Result<(), PipelineError> {
        let path = self.asset_file(&log.asset_id, STAGE_LOG_FILE);
        let text = serde_json::to_string_pretty(log).expect("stage logs serialize") + "\n";
        write_atomic(&path, text.as_bytes()).map_err(io_err(&path))
    }

    pub(crate) fn remove_if_present(&self, id: &str, name: &str) -> Result<(), PipelineError> {
        let path = self.asset_file(id, name);
        match std::fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(&path)(e)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Filtered,
    Error,
}

impl StageStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StageStatus::Ok => "ok",
            StageStatus::Filtered => "filtered",
            StageStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: String,
    pub status: StageStatus,
    pub timestamp: DateTime<Utc>,
    pub params_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub asset_id: String,
    pub entries: Vec<StageEntry>,
}

impl StageLog {
    pub fn terminal_status(&self) -> Option<StageStatus> {
        self.entries.last().map(|e| e.status)
    }

    pub fn status_of(&self, stage: &str) -> Option<StageStatus> {
        self.entries.iter().find(|e| e.stage == stage).map(|e| e.status)
    }

    /// Stages are a prefix of `order`, every stage but the last is `ok`.
    pub fn is_well_ordered(&self, order: &[&str]) -> bool {
        self.entries.len() <= order.len()
            && self.entries.iter().zip(order).all(|(e, s)| e.stage == *s)
            && self.entries.iter().rev().skip(1).all(|e| e.status == StageStatus::Ok)
    }
}
