use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{"embed_dim": 8, "attn_heads": 2, "mlp_hidden": 8, "epochs": 3, "k": 3}"#;

fn peplink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peplink"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = peplink(args);
    assert!(
        out.status.success(),
        "peplink {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// synth -> ingest -> build, returning (tmp, config path, ingest dir, build dir).
fn pipeline() -> (TempDir, std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("config.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let raw = tmp.path().join("raw");
    let ing = tmp.path().join("ingested");
    let built = tmp.path().join("built");
    ok(&["synth", "--out", s(&raw), "--seed", "4"]);
    ok(&["ingest", "--data", s(&raw), "--out", s(&ing), "--config", s(&cfg)]);
    ok(&["build", "--ingested", s(&ing), "--out", s(&built), "--emit-similarity", "--config", s(&cfg)]);
    (tmp, cfg, ing, built)
}

#[test]
fn full_pipeline_writes_declared_outputs() {
    let (tmp, cfg, ing, built) = pipeline();
    for f in ["peptides.tsv", "microbes.tsv", "diseases.tsv", "associations.tsv", "manifest.json", "dedup_log.tsv"] {
        assert!(ing.join(f).is_file(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ing.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["microbes"], 10);
    assert_eq!(manifest["diseases"], 15);
    for f in ["graph.json", "node_index.tsv", "similarity_peptide.csv", "similarity_microbe.csv", "similarity_disease.csv"] {
        assert!(built.join(f).is_file(), "{f}");
    }

    let graph = built.join("graph.json");
    let model_dir = tmp.path().join("model");
    ok(&["train", "--graph", s(&graph), "--out", s(&model_dir), "--config", s(&cfg)]);
    assert!(model_dir.join("checkpoint.json").is_file());
    assert_eq!(std::fs::read_to_string(model_dir.join("training_log.tsv")).unwrap().lines().count(), 4);

    ok(&["predict", "--graph", s(&graph), "--out", s(&model_dir), "--top-n", "10", "--config", s(&cfg)]);
    let preds = std::fs::read_to_string(model_dir.join("predictions.tsv")).unwrap();
    let lines: Vec<&str> = preds.lines().collect();
    assert_eq!(lines[0], "rank\tpeptide_id\tpeptide_sequence\tdisease_id\tdisease_name\tscore\tlinking_microbes");
    assert_eq!(lines.len(), 11);
    let scores: Vec<f64> = lines[1..].iter().map(|l| l.split('\t').nth(5).unwrap().parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    let eval_dir = tmp.path().join("eval");
    ok(&["evaluate", "--graph", s(&graph), "--out", s(&eval_dir), "--config", s(&cfg)]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(eval_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    assert_eq!(report["base_seed"], 0);
    assert!(eval_dir.join("curves/rep0_fold2_roc.csv").is_file());
    assert!(eval_dir.join("curves/rep0_fold0_pr.csv").is_file());
}

#[test]
fn evaluate_is_byte_identical_across_runs() {
    let (tmp, cfg, _, built) = pipeline();
    let graph = built.join("graph.json");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["evaluate", "--graph", s(&graph), "--out", s(&a), "--config", s(&cfg), "--seed", "11"]);
    ok(&["evaluate", "--graph", s(&graph), "--out", s(&b), "--config", s(&cfg), "--seed", "11"]);
    assert_eq!(std::fs::read(a.join("metrics.json")).unwrap(), std::fs::read(b.join("metrics.json")).unwrap());
}

#[test]
fn ingest_is_idempotent_on_its_own_output() {
    let (tmp, cfg, ing, _) = pipeline();
    let again = tmp.path().join("again");
    ok(&["ingest", "--data", s(&ing), "--out", s(&again), "--config", s(&cfg)]);
    assert_eq!(std::fs::read(ing.join("manifest.json")).unwrap(), std::fs::read(again.join("manifest.json")).unwrap());
}

#[test]
fn missing_input_fails_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("raw");
    ok(&["synth", "--out", s(&raw)]);
    std::fs::remove_file(raw.join("diseases.tsv")).unwrap();
    let out_dir = tmp.path().join("out");
    let out = peplink(&["ingest", "--data", s(&raw), "--out", s(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
    assert!(!out_dir.exists());
}

#[test]
fn bad_config_fails_before_writing() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"tua": 0.4}"#).unwrap();
    let out_dir = tmp.path().join("out");
    let out = peplink(&["synth", "--out", s(&out_dir), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tua"));
    assert!(!out_dir.exists());
}

#[test]
fn invalid_env_override_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let raw = tmp.path().join("raw");
    let out = Command::new(env!("CARGO_BIN_EXE_peplink"))
        .args(["synth", "--out", s(&raw)])
        .env("PEPLINK_DROP_RATE", "1.5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("drop_rate"));
}

#[test]
fn corrupt_graph_is_a_format_error() {
    let tmp = TempDir::new().unwrap();
    let graph = tmp.path().join("graph.json");
    std::fs::write(&graph, r#"{"format": "something-else"}"#).unwrap();
    let out = peplink(&["evaluate", "--graph", s(&graph), "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("evaluate") && err.contains("graph"), "{err}");
}

#[test]
fn sweep_rows_match_grid() {
    let (tmp, cfg, _, built) = pipeline();
    let graph = built.join("graph.json");
    let out_dir = tmp.path().join("sweep");
    ok(&["sweep", "--graph", s(&graph), "--out", s(&out_dir), "--config", s(&cfg), "--axis", "tau"]);
    let table = std::fs::read_to_string(out_dir.join("sweep.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.starts_with("tau\t")));
    let bad = peplink(&["sweep", "--graph", s(&graph), "--out", s(&out_dir), "--axis", "embed-dim", "--values", "30"]);
    assert_eq!(bad.status.code(), Some(1));
}
