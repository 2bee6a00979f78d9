//! Contract tests for the `refgrasp` binary: exit codes, the dataset-root
//! environment fallback, stderr run provenance, idempotence, and the
//! promise that no subcommand writes into its input dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use refgrasp::cli::DATASET_ROOT_ENV;
use refgrasp::dataset::hash_tree;

fn refgrasp(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_refgrasp"));
    // Tests control the root explicitly; never inherit it from the
    // developer's shell.
    cmd.env_remove(DATASET_ROOT_ENV);
    cmd.args(args);
    cmd
}

fn run_ok(args: &[&str]) -> Output {
    let out = refgrasp(args).output().expect("spawn refgrasp");
    assert_eq!(
        out.status.code(),
        Some(0),
        "refgrasp {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    refgrasp(args).output().expect("spawn refgrasp").status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthesized corpus under `dir/data`, returned with its tree hash.
fn seed_corpus(dir: &Path) -> (PathBuf, String) {
    let root = dir.join("data");
    run_ok(&["synth", "--out", s(&root), "--seed", "5", "--scenes", "8"]);
    let hash = hash_tree(&root).expect("hash corpus");
    (root, hash)
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(exit_code(&["no-such-command"]), 2);
    assert_eq!(exit_code(&["synth"]), 2, "--out is required");
    assert_eq!(exit_code(&["synth", "--out", "/tmp/x", "--bogus-flag"]), 2);
    assert_eq!(exit_code(&["stats"]), 2, "no root given and none in env");
    assert_eq!(exit_code(&["evaluate", "--dataset", "/tmp/x"]), 2, "--predictions is required");
}

#[test]
fn help_exits_0() {
    assert_eq!(exit_code(&["--help"]), 0);
    assert_eq!(exit_code(&["synth", "--help"]), 0);
}

#[test]
fn every_run_announces_seed_and_config_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["synth", "--out", s(&dir.path().join("d")), "--seed", "41", "--scenes", "3"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("seed: 41"), "stderr was: {err}");
    let digest_line = err
        .lines()
        .find(|l| l.starts_with("config-digest: "))
        .expect("config digest line");
    let digest = digest_line.trim_start_matches("config-digest: ").trim();
    assert_eq!(digest.len(), 16, "digest is 8 bytes of hex");
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn synth_same_seed_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["synth", "--out", s(&a), "--seed", "7", "--scenes", "6"]);
    run_ok(&["synth", "--out", s(&b), "--seed", "7", "--scenes", "6"]);
    assert_eq!(hash_tree(&a).unwrap(), hash_tree(&b).unwrap());

    let c = dir.path().join("c");
    run_ok(&["synth", "--out", s(&c), "--seed", "8", "--scenes", "6"]);
    assert_ne!(hash_tree(&a).unwrap(), hash_tree(&c).unwrap(), "seed must matter");
}

#[test]
fn read_only_subcommands_never_touch_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (root, before) = seed_corpus(dir.path());
    let maps = dir.path().join("maps");
    let gen = dir.path().join("gen");

    run_ok(&["validate", "--dataset", s(&root)]);
    run_ok(&["stats", "--dataset", s(&root), "--format", "machine"]);
    run_ok(&["generate", "--dataset", s(&root), "--out", s(&gen), "--seed", "3"]);
    run_ok(&["render-maps", "--dataset", s(&root), "--out", s(&maps), "--split", "test"]);

    assert_eq!(hash_tree(&root).unwrap(), before, "input corpus was modified");
}

#[test]
fn generate_refuses_to_overwrite_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let (root, before) = seed_corpus(dir.path());
    assert_eq!(exit_code(&["generate", "--dataset", s(&root), "--out", s(&root)]), 2);
    assert_eq!(hash_tree(&root).unwrap(), before);
}

#[test]
fn dataset_root_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (root, _) = seed_corpus(dir.path());
    let out = refgrasp(&["stats", "--format", "machine"])
        .env(DATASET_ROOT_ENV, &root)
        .output()
        .expect("spawn refgrasp");
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).expect("machine output is JSON");
    assert_eq!(json["scenes"], 8);
}

#[test]
fn validation_failure_exits_1_and_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let (root, _) = seed_corpus(dir.path());

    // Re-point one record at a different object: its text no longer
    // singles out the new target.
    let train = root.join("tuples").join("train.jsonl");
    let lines: Vec<String> = std::fs::read_to_string(&train)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    let mut tampered = Vec::new();
    let mut done = false;
    for line in lines {
        let mut v: serde_json::Value = serde_json::from_str(&line).unwrap();
        if !done {
            let old = v["target_id"].as_u64().unwrap();
            v["target_id"] = serde_json::json!(old + 1000);
            done = true;
        }
        tampered.push(serde_json::to_string(&v).unwrap());
    }
    std::fs::write(&train, tampered.join("\n") + "\n").unwrap();

    // The tampered id no longer resolves, so even loading refuses.
    let out = refgrasp(&["validate", "--dataset", s(&root)]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:"), "stderr was: {err}");
}

#[test]
fn evaluate_rejects_predictions_for_unknown_records() {
    let dir = tempfile::tempdir().unwrap();
    let (root, _) = seed_corpus(dir.path());
    let preds = dir.path().join("preds.jsonl");
    std::fs::write(
        &preds,
        "{\"tuple_id\":\"no-such-record#000\",\"grasps\":[]}\n",
    )
    .unwrap();
    let out = refgrasp(&["evaluate", "--dataset", s(&root), "--predictions", s(&preds)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_then_decode_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (root, _) = seed_corpus(dir.path());
    let maps = dir.path().join("maps");
    run_ok(&["render-maps", "--dataset", s(&root), "--out", s(&maps), "--split", "test"]);
    let maps_hash = hash_tree(&maps).unwrap();

    // Rendering is idempotent.
    run_ok(&["render-maps", "--dataset", s(&root), "--out", s(&maps), "--split", "test"]);
    assert_eq!(hash_tree(&maps).unwrap(), maps_hash);

    let stem = std::fs::read_dir(&maps)
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().into_string().ok())
        .find_map(|n| n.strip_suffix("_quality.png").map(String::from))
        .expect("at least one rendered record");
    let out = run_ok(&["decode", s(&maps), &stem, "--format", "machine"]);
    let decoded: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(
        !decoded.as_array().unwrap().is_empty(),
        "decode found no grasps in {stem}"
    );
}

#[test]
fn evaluate_scores_the_perfect_oracle_at_100() {
    use refgrasp::synth::{oracle_predict, NoiseSpec};

    let dir = tempfile::tempdir().unwrap();
    let (root, _) = seed_corpus(dir.path());
    let dataset = refgrasp::dataset::load_dataset(&root).unwrap();
    let predictions =
        oracle_predict(&dataset.scenes, &dataset.tuples, &NoiseSpec::default(), 5).unwrap();
    let mut body = String::new();
    for p in &predictions {
        body.push_str(&serde_json::to_string(p).unwrap());
        body.push('\n');
    }
    let preds = dir.path().join("preds.jsonl");
    std::fs::write(&preds, body).unwrap();

    let out = run_ok(&[
        "evaluate",
        "--dataset",
        s(&root),
        "--predictions",
        s(&preds),
        "--format",
        "machine",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["overall"]["mean_iou"], 100.0);
    assert_eq!(report["overall"]["j_at_1"], 100.0);

    // Family filtering restricts the denominator.
    let out = run_ok(&[
        "evaluate",
        "--dataset",
        s(&root),
        "--predictions",
        s(&preds),
        "--families",
        "name",
        "--format",
        "machine",
    ]);
    let filtered: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let name_count = filtered["overall"]["count"].as_u64().unwrap();
    assert!(name_count > 0);
    assert!(name_count < report["overall"]["count"].as_u64().unwrap());
}
