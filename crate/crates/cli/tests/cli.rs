use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use persona_miner::ingest::RepoSlug;
use persona_miner::metrics::{write_metrics_csv, MetricVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_persona-miner"))
}

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/three_repos.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

/// Three well separated groups in RC space, 20 individuals each.
fn blob_metrics(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centres = [[2.0; 6], [40.0; 6], [85.0; 6]];
    let mut vectors = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for i in 0..20 {
            let mut rcs = [0.0; 6];
            for (r, m) in rcs.iter_mut().zip(centre) {
                *r = (m + rng.random_range(-1.0..1.0f64)).clamp(0.0, 100.0);
            }
            let repo = RepoSlug::new("blobs", format!("r{c}")).unwrap();
            vectors.push(MetricVector::from_rcs(repo, format!("u{i}"), rcs, 5.0, 5.0, 6));
        }
    }
    let f = std::fs::File::create(dir.join("metrics.csv")).unwrap();
    write_metrics_csv(&vectors, f).unwrap();
}

#[test]
fn missing_archive_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "output_dir = \"out\"\n[source]\narchive = \"nope.jsonl\"\n");
    let out = run(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.jsonl"), "{err}");
}

#[test]
fn bad_flag_value_exits_2() {
    let out = run(&["--fraction", "lots", "run"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["--config", fixture_config().to_str().unwrap(), "--fraction", "1.5", "filter"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cluster_finds_three_blobs() {
    let dir = tempfile::tempdir().unwrap();
    blob_metrics(dir.path());
    let out = run(&["--output-dir", dir.path().to_str().unwrap(), "cluster"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let labels = persona_miner::cluster::read_labels_csv(std::fs::File::open(dir.path().join("labels.csv")).unwrap()).unwrap();
    assert_eq!(labels.len(), 60);
    let clusters: std::collections::BTreeSet<usize> = labels.iter().map(|l| l.cluster).collect();
    assert_eq!(clusters.len(), 3);
    // each blob lands in a single cluster
    for chunk in labels.chunks(20) {
        assert!(chunk.iter().all(|l| l.cluster == chunk[0].cluster));
    }
    assert!(dir.path().join("dendrogram.json").is_file());
}

#[test]
fn assign_without_labels_uses_direct_mode() {
    let dir = tempfile::tempdir().unwrap();
    blob_metrics(dir.path());
    let out = run(&["--output-dir", dir.path().to_str().unwrap(), "assign"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = persona_miner::personas::read_personas_csv(std::fs::File::open(dir.path().join("personas.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 60);
    assert!(rows.iter().all(|r| r.cluster.is_none() && r.subcluster.is_none()));
    assert_eq!(rows[0].persona, "Ephemeral Contributor");
}

#[test]
fn stage_without_inputs_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--output-dir", dir.path().to_str().unwrap(), "analyze"]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("analyze stage failed"));
}

#[test]
fn simulate_writes_truth_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--output-dir", dir.path().to_str().unwrap(), "simulate", "--count", "30"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("simulation.json")).unwrap()).unwrap();
    assert_eq!(report["individuals"], 210);
    assert!(report["direct_recovery"].as_f64().unwrap() > 0.9);
    assert!(dir.path().join("truth.csv").is_file());
    assert!(dir.path().join("personas.csv").is_file());
}

#[test]
fn full_run_on_fixture_writes_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--config", fixture_config().to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap(), "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: persona_miner_cli::RunManifest =
        serde_json::from_slice(&std::fs::read(dir.path().join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(m.status, persona_miner_cli::Status::Complete);
    assert_eq!(m.stages_completed.len(), 8);
    for name in ["totals.csv", "upset.json", "composition.csv", "metrics.csv", "labels.csv", "stats.json", "dendrogram.json", "personas.csv"] {
        assert!(m.outputs.contains_key(name), "{name} missing");
    }
    let eligibility = std::fs::read_to_string(dir.path().join("eligibility.csv")).unwrap();
    assert!(eligibility.contains("fixture-lab/tiny-fork,false"));
}

#[test]
fn replicate_from_published_table() {
    let dir = tempfile::tempdir().unwrap();
    blob_metrics(dir.path());
    let table = dir.path().join("metrics.csv");
    let out_dir = dir.path().join("out");
    let out = run(&["--output-dir", out_dir.to_str().unwrap(), "run", "--replicate", table.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("personas.csv").is_file());
    assert!(out_dir.join("summary.json").is_file());
}
