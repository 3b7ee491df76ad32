use std::path::Path;
use std::process::{Command, Output};

fn twinkit(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinkit"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("TWINKIT_ENDPOINT")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "stdout: {stdout}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    stdout
}

#[test]
fn ingest_run_layout_vqa_stats_verify() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    assert!(ok(twinkit(&store, &["ingest", "--synthetic", "4", "--seed", "2"])).contains("ingested 4 assets"));
    let run = ok(twinkit(&store, &["run", "--seed", "2"]));
    assert!(run.contains("annotated"), "{run}");
    let stats: serde_json::Value = serde_json::from_str(&ok(twinkit(&store, &["stats"]))).unwrap();
    assert_eq!(stats["ingested"], 4);
    let annotated = stats["annotated"].as_u64().unwrap();
    assert!(annotated >= 2);

    let layout_path = dir.path().join("scene.json");
    let layout_path_s = layout_path.to_str().unwrap();
    ok(twinkit(&store, &["layout", "--num-objects", "2", "--table-size", "1.2x0.8", "--out", layout_path_s]));
    let layout: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&layout_path).unwrap()).unwrap();
    assert_eq!(layout["placements"].as_array().unwrap().len(), 2);
    assert_eq!(layout["table"]["width"], 1.2);

    let vqa = ok(twinkit(&store, &["vqa", layout_path_s, "--per-category", "3"]));
    assert!(vqa.lines().count() > 0);
    for line in vqa.lines() {
        let pair: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(pair["grounding"]["facts"].as_array().is_some_and(|f| !f.is_empty()));
    }

    let verify = ok(twinkit(&store, &["verify", "--mu", "0"]));
    assert!(verify.lines().all(|l| l.contains(": 0 verified")), "{verify}");
    let stats: serde_json::Value = serde_json::from_str(&ok(twinkit(&store, &["stats"]))).unwrap();
    assert_eq!(stats["verified"], 0);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let out = twinkit(&store, &["run", "--fps-k", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = twinkit(&store, &["layout", "--assets", "ghost"]);
    assert!(!out.status.success());

    let out = twinkit(&store, &["layout", "--num-objects", "1", "--table-size", "0x1"]);
    assert!(!out.status.success());

    let out = twinkit(&store, &["run", "--clients", "remote"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("endpoint"));
}
