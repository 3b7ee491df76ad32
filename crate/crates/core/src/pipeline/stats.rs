use serde::{Deserialize, Serialize};

use super::store::{StageStatus, Store, MANIFEST_FILE};
use super::PipelineError;
use crate::model::{load_manifest, GraspCounts, PipelineStats};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("asset `{asset_id}` records {verified} verified grasps but only {candidates} candidates")]
    Integrity { asset_id: String, verified: u64, candidates: u64 },
    #[error("asset `{0}` has a manifest but its stage log does not end in success")]
    Inconsistent(String),
}

/// What the statistics need from one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSummary {
    pub asset_id: String,
    /// Terminal status of the stage log; `None` when never processed.
    pub terminal: Option<StageStatus>,
    pub passed_gate: bool,
    /// Present when a manifest exists.
    pub counts: Option<GraspCounts>,
}

/// Totals and rates over a batch. Rates are plain ratios of the totals;
/// per-object averages divide by the number of annotated assets.
pub fn compute_stats(assets: &[AssetSummary]) -> Result<PipelineStats, StatsError> {
    let mut s = PipelineStats {
        ingested: assets.len() as u64,
        ..Default::default()
    };
    for a in assets {
        if a.passed_gate {
            s.gated += 1;
        }
        if a.terminal == Some(StageStatus::Error) {
            s.errored += 1;
        }
        if let Some(c) = a.counts {
            if a.terminal != Some(StageStatus::Ok) {
                return Err(StatsError::Inconsistent(a.asset_id.clone()));
            }
            if c.verified > c.candidates {
                return Err(StatsError::Integrity {
                    asset_id: a.asset_id.clone(),
                    verified: c.verified,
                    candidates: c.candidates,
                });
            }
            s.annotated += 1;
            s.raw_proposals += c.raw_proposals;
            s.after_proximity += c.after_proximity;
            s.candidates += c.candidates;
            s.verified += c.verified;
        }
    }
    Ok(s.with_rates())
}

/// [`compute_stats`] over the stage logs and manifests in a store.
pub fn store_stats(store: &Store) -> Result<PipelineStats, PipelineError> {
    let mut summaries = Vec::new();
    for id in store.asset_ids()? {
        let log = store.read_stage_log(&id)?;
        let manifest = store.asset_file(&id, MANIFEST_FILE);
        let counts = if manifest.is_file() {
            Some(load_manifest(&manifest)?.provenance.grasp_counts)
        } else {
            None
        };
        summaries.push(AssetSummary {
            terminal: log.as_ref().and_then(|l| l.terminal_status()),
            passed_gate: log.as_ref().and_then(|l| l.status_of("quality_gate")) == Some(StageStatus::Ok),
            counts,
            asset_id: id,
        });
    }
    Ok(compute_stats(&summaries)?)
}
