mod common;

use proptest::prelude::*;

use common::tol;
use twinkit::model::GraspCounts;
use twinkit::pipeline::{compute_stats, AssetSummary, StageStatus, StatsError};

fn annotated(id: usize, candidates: u64, verified: u64) -> AssetSummary {
    AssetSummary {
        asset_id: format!("a{id}"),
        terminal: Some(StageStatus::Ok),
        passed_gate: true,
        counts: Some(GraspCounts {
            raw_proposals: 2 * candidates,
            after_proximity: candidates + 5,
            candidates,
            verified,
        }),
    }
}

/// 100 objects averaging 81.63 candidates and 62.14 verified grasps.
fn table_counts() -> Vec<AssetSummary> {
    (0..100)
        .map(|i| annotated(i, if i < 63 { 82 } else { 81 }, if i < 14 { 63 } else { 62 }))
        .collect()
}

#[test]
fn reported_verification_rate_arithmetic() {
    let s = compute_stats(&table_counts()).unwrap();
    assert_eq!((s.candidates, s.verified), (8163, 6214));
    assert!((s.avg_candidates_per_object.unwrap() - 81.63).abs() < 1e-12);
    assert!((s.avg_verified_per_object.unwrap() - 62.14).abs() < 1e-12);
    let pct = s.verification_rate.unwrap() * 100.0;
    assert!((pct - 76.13).abs() <= tol::RATE_PP, "{pct}");
    s.validate().unwrap();
}

#[test]
fn rates_undefined_without_denominators() {
    let s = compute_stats(&[]).unwrap();
    assert_eq!(s.verification_rate, None);
    assert_eq!(s.gate_pass_rate, None);
    let filtered = AssetSummary {
        asset_id: "f".into(),
        terminal: Some(StageStatus::Filtered),
        passed_gate: false,
        counts: None,
    };
    let s = compute_stats(&[filtered]).unwrap();
    assert_eq!(s.gate_pass_rate, Some(0.0));
    assert_eq!(s.avg_candidates_per_object, None);
    assert_eq!(s.verification_rate, None);
}

#[test]
fn integrity_violations_are_errors() {
    match compute_stats(&[annotated(0, 3, 5)]) {
        Err(StatsError::Integrity { verified: 5, candidates: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    let mut stale = annotated(1, 5, 3);
    stale.terminal = Some(StageStatus::Error);
    assert!(matches!(compute_stats(&[stale]), Err(StatsError::Inconsistent(_))));
}

proptest! {
    #[test]
    fn rates_are_ratios_of_totals(rows in prop::collection::vec((0u64..200, 0u64..200, any::<bool>(), 0u8..3), 0..40)) {
        let mut assets = Vec::new();
        let (mut cand, mut ver, mut gated, mut ann) = (0u64, 0u64, 0u64, 0u64);
        for (i, (a, b, gate, kind)) in rows.iter().enumerate() {
            let (c, v) = (a.max(b), a.min(b));
            let mut s = annotated(i, *c, *v);
            s.passed_gate = *gate || *kind == 0;
            if *kind == 0 {
                cand += c;
                ver += v;
                ann += 1;
            } else {
                s.counts = None;
                s.terminal = Some(if *kind == 1 { StageStatus::Filtered } else { StageStatus::Error });
            }
            gated += s.passed_gate as u64;
            assets.push(s);
        }
        let s = compute_stats(&assets).unwrap();
        prop_assert_eq!((s.candidates, s.verified, s.gated, s.annotated), (cand, ver, gated, ann));
        let expect = |n: u64, d: u64| (d > 0).then(|| n as f64 / d as f64);
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() <= tol::STATS_ABS,
            (None, None) => true,
            _ => false,
        };
        prop_assert!(close(s.verification_rate, expect(ver, cand)));
        prop_assert!(close(s.gate_pass_rate, expect(gated, rows.len() as u64)));
        prop_assert!(close(s.avg_verified_per_object, expect(ver, ann)));
        prop_assert!(s.validate().is_ok());
    }
}
