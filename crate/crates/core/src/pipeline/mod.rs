//! Batch orchestration over a file-tree store: ingest, per-asset stage
//! execution with resumable stage logs, statistics and batch re-verification.

mod config;
mod run;
mod stats;
mod store;
mod synthetic;

use std::path::PathBuf;

use sha2::{Digest, Sha256};

pub use config::{ClientMode, PipelineConfig, DEFAULT_RENDER_SIZE, DEFAULT_VIEWS};
pub use run::{
    build_client, ingest_dir, reverify_asset, run_pipeline, run_pipeline_with, AssetOutcome, AssetStatus, RunReport, STAGES,
};
pub use stats::{compute_stats, store_stats, AssetSummary, StatsError};
pub use store::{
    is_valid_asset_id, StageEntry, StageLog, StageStatus, Store, CANDIDATES_FILE, MANIFEST_FILE, MESH_FILE,
    RENDERS_DIR, SOURCE_FILE, STAGE_LOG_FILE, VERDICTS_FILE,
};
pub use synthetic::{ingest_synthetic, synthetic_assets, SyntheticAsset};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store entry: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Manifest(#[from] crate::model::ManifestError),
    #[error("{0}")]
    Stage(String),
}

/// Seed for one asset, independent of processing order.
pub fn asset_seed(global_seed: u64, asset_id: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(global_seed.to_le_bytes())
        .chain_update(asset_id.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Independent stream for one randomized stage of an asset.
pub(crate) fn stage_seed(asset_seed: u64, stage: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(asset_seed.to_le_bytes())
        .chain_update(stage.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
