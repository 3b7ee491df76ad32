mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::random_record;
use twinkit::model::{load_manifest, manifest_from_str, manifest_to_string, save_manifest, ManifestError, Quat};

#[test]
fn two_hundred_records_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for i in 0..200 {
        let record = random_record(&mut rng, &format!("asset_{i:03}"));
        let text = manifest_to_string(&record).unwrap();
        let back = manifest_from_str(&text).unwrap();
        assert_eq!(back, record, "record {i}");
        // a second pass is byte-stable
        assert_eq!(manifest_to_string(&back).unwrap(), text);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let record = random_record(&mut ChaCha8Rng::seed_from_u64(1), "file_asset");
    let path = dir.path().join("m.json");
    save_manifest(&record, &path).unwrap();
    assert_eq!(load_manifest(&path).unwrap(), record);
    assert!(matches!(load_manifest(&dir.path().join("missing.json")), Err(ManifestError::Io { .. })));
}

#[test]
fn unknown_top_level_fields_survive() {
    let record = random_record(&mut ChaCha8Rng::seed_from_u64(2), "x");
    let mut v: serde_json::Value = serde_json::from_str(&manifest_to_string(&record).unwrap()).unwrap();
    v["future_field"] = serde_json::json!({"nested": [1, 2.5, "three"]});
    let back = manifest_from_str(&v.to_string()).unwrap();
    assert_eq!(back.extra["future_field"], v["future_field"]);
    let again: serde_json::Value = serde_json::from_str(&manifest_to_string(&back).unwrap()).unwrap();
    assert_eq!(again, v);
}

#[test]
fn parse_errors_name_the_field_and_line() {
    let record = random_record(&mut ChaCha8Rng::seed_from_u64(3), "x");
    let text = manifest_to_string(&record).unwrap().replace("\"mass\":", "\"mass\": \"heavy\", \"_m\":");
    match manifest_from_str(&text) {
        Err(ManifestError::Parse { line, field, .. }) => {
            assert!(field.ends_with("mass"), "{field}");
            let mass_line = text.lines().position(|l| l.contains("\"mass\"")).unwrap() + 1;
            assert_eq!(line, mass_line);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn invalid_records_are_rejected_both_ways() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = random_record(&mut rng, "x");
    bad.placement.placement_orientation = Quat { w: 2.0, x: 0.0, y: 0.0, z: 0.0 };
    assert!(matches!(manifest_to_string(&bad), Err(ManifestError::Validation(_))));

    let good = random_record(&mut rng, "y");
    let mut v: serde_json::Value = serde_json::from_str(&manifest_to_string(&good).unwrap()).unwrap();
    v["physical"]["mass"] = serde_json::json!(-1.0);
    match manifest_from_str(&v.to_string()) {
        Err(ManifestError::Validation(e)) => assert_eq!(e.field, "physical.mass"),
        other => panic!("{other:?}"),
    }
    v["physical"]["mass"] = serde_json::json!(1.0);
    v["provenance"]["grasp_counts"]["verified"] = serde_json::json!(999);
    assert!(manifest_from_str(&v.to_string()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_records_round_trip(seed in any::<u64>()) {
        let record = random_record(&mut ChaCha8Rng::seed_from_u64(seed), "p");
        let back = manifest_from_str(&manifest_to_string(&record).unwrap()).unwrap();
        prop_assert_eq!(back, record);
    }
}
