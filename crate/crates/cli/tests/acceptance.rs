//! Acceptance suite: one PASS/FAIL line per criterion, then a nonzero exit
//! if any criterion failed. Run with `cargo test -p peplink-cli --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use peplink_core::augment::{augment_adjacency, select_prompt_nodes};
use peplink_core::eval::{auroc, auroc_brute_force, compute_metrics, prompt_set};
use peplink_core::model::LossInputs;
use peplink_core::similarity::{gip_kernel, oracle, peptide_similarity_from_sequences, smith_waterman_score, InteractionProfile};
use peplink_core::synthetic::SyntheticSpec;
use peplink_core::tensor::gradcheck::{check_gradients, DEFAULT_STEP};
use peplink_core::{
    run_cross_validation, AdamConfig, AlignmentParams, BandwidthMode, EntityClass, HeteroGraph, MetricsReport, Model,
    ModelConfig, PerturbScope, RunConfig, SimilarityMatrix, Tensor,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

/// Settings for the synthetic benchmark. Everything not listed is the
/// library default. Five repetitions average out the fold-to-fold spread of a
/// 60-positive benchmark; embed 64 keeps them inside the time budget.
fn benchmark_config() -> RunConfig {
    RunConfig {
        embed_dim: 64,
        optimizer: AdamConfig {
            lr: 3e-3,
            ..AdamConfig::default()
        },
        k: 5,
        ratio: 1.0,
        repetitions: 5,
        ..RunConfig::default()
    }
}

fn benchmark_graph(cfg: &RunConfig) -> HeteroGraph {
    SyntheticSpec::default()
        .generate()
        .unwrap()
        .graph(&cfg.alignment, cfg.gamma_prime, cfg.gip_bandwidth_mode)
        .unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    println!(
        "[{}] {id}. {name}: {detail} ({:.1}s, limit {}s{})",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over time" }
    );
    ok
}

fn c1_alignment_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = AlignmentParams::default();
    let pairs = 300;
    let mut mismatches = 0;
    for _ in 0..pairs {
        let mut seq = || -> Vec<u8> { (0..rng.gen_range(1..=6)).map(|_| *b"ACGT".choose(&mut rng).unwrap()).collect() };
        let (a, b) = (seq(), seq());
        if smith_waterman_score(&a, &b, &params) != oracle::brute_force_local(&a, &b, &params).0 {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{pairs} random pairs, {mismatches} differ from exhaustive enumeration"))
}

fn c2_gradients() -> Outcome {
    let spec = SyntheticSpec {
        groups: 2,
        peptides_per_group: 3,
        extra_diseases: 2,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let graph = spec.generate().unwrap().graph(&AlignmentParams::default(), 1.0, BandwidthMode::default()).unwrap();
    let config = ModelConfig {
        embed_dim: 6,
        gcn_layers: 2,
        attn_heads: 2,
        mlp_hidden: 5,
        ..ModelConfig::default()
    };
    let model = Model::new(config, graph.side(), 17).unwrap();
    let (np, _, nd) = graph.counts();
    let d0 = graph.range(EntityClass::Disease).start;
    let pairs: Vec<(usize, usize)> = (0..np).map(|p| (p, d0 + (p * 3) % nd)).collect();
    let labels: Vec<f64> = (0..np).map(|p| (p % 2) as f64).collect();
    let view = peplink_core::augment_graph(&graph, &prompt_set(&graph, 0.4), 0.3, PerturbScope::All, 8).unwrap();
    let inputs = LossInputs::new(graph.adjacency(), Some(&view.adjacency), pairs, labels, 0.7).unwrap();
    let errors = check_gradients(model.params(), DEFAULT_STEP, |_, vars| Ok(model.loss(vars, &inputs)?.total)).unwrap();
    let per_block: Vec<(&str, f64)> = model
        .blocks()
        .into_iter()
        .map(|(b, idx)| (b, idx.iter().map(|&i| errors[i]).fold(0.0, f64::max)))
        .collect();
    let pass = graph.side() <= 12 && per_block.iter().all(|(_, e)| *e < 1e-4);
    let detail = per_block.iter().map(|(b, e)| format!("{b} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("{} nodes, max relative error per block: {detail}", graph.side()))
}

fn c3_augmentation() -> Outcome {
    let (np, nm, n) = (60, 70, 200);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = Tensor::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                let w = rng.gen_range(0.05..=1.0);
                m.set(i, j, w);
                m.set(j, i, w);
            }
        }
    }
    let scores: Vec<f64> = (0..np).map(|_| rng.gen_range(0.0..1.0)).collect();
    let prompts = select_prompt_nodes(&scores, 0.5);
    let block = |g: usize| {
        if g < np {
            EntityClass::Peptide
        } else if g < np + nm {
            EntityClass::Microbe
        } else {
            EntityClass::Disease
        }
    };
    let shielded: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| prompts.contains(i) || prompts.contains(j))
        .collect();
    let eligible: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| m.get(i, j) != 0.0 && !prompts.contains(i) && !prompts.contains(j))
        .collect();

    let draws = 1000u64;
    let mut pass = true;
    let mut parts = vec![format!("{} prompts, {} eligible edges", prompts.len(), eligible.len())];
    for (k, p) in [0.1, 0.2, 0.5].into_iter().enumerate() {
        let mut changed = 0usize;
        let mut kept = 0usize;
        for s in 0..draws {
            let v = augment_adjacency(&m, block, &prompts, p, PerturbScope::All, k as u64 * draws + s).unwrap();
            changed += shielded.iter().filter(|&&(i, j)| v.adjacency.get(i, j) != m.get(i, j)).count();
            kept += eligible.iter().filter(|&&(i, j)| v.adjacency.get(i, j) != 0.0).count();
        }
        let trials = (draws as usize * eligible.len()) as f64;
        let frac = kept as f64 / trials;
        let sigma = (p * (1.0 - p) / trials).sqrt();
        let z = (frac - (1.0 - p)) / sigma;
        pass &= changed == 0 && z.abs() <= 3.0;
        parts.push(format!("p={p}: {changed} prompt changes, keep {frac:.5} (z={z:+.2})"));
    }
    outcome(pass, parts.join("; "))
}

fn c4_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut consistent = true;
    for _ in 0..100 {
        let len = rng.gen_range(2..=20);
        let mut labels: Vec<bool> = (0..len).map(|_| rng.gen_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        labels.shuffle(&mut rng);
        // Coarse scores force ties.
        let scores: Vec<f64> = (0..len).map(|_| rng.gen_range(0..8) as f64 / 7.0).collect();
        let fast = auroc(&scores, &labels).unwrap().unwrap();
        let slow = auroc_brute_force(&scores, &labels).unwrap();
        worst = worst.max((fast - slow).abs());

        let m = compute_metrics(&scores, &labels, 0.5).unwrap();
        let c = m.confusion;
        let pos = labels.iter().filter(|&&l| l).count() as u64;
        let total = c.tp + c.fp + c.tn + c.fn_;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let f1 = if m.precision + m.recall == 0.0 { 0.0 } else { 2.0 * m.precision * m.recall / (m.precision + m.recall) };
        consistent &= total == len as u64
            && c.tp + c.fn_ == pos
            && m.accuracy == ratio(c.tp + c.tn, total)
            && m.precision == ratio(c.tp, c.tp + c.fp)
            && m.recall == ratio(c.tp, c.tp + c.fn_)
            && (m.f1 - f1).abs() < 1e-12;
    }
    outcome(worst <= 1e-12 && consistent, format!("100 instances, max |fast - brute| = {worst:.1e}, confusion consistent: {consistent}"))
}

fn symmetric_unit_diag(s: &SimilarityMatrix) -> bool {
    let n = s.len();
    (0..n).all(|i| s.get(i, i) == 1.0 && (0..n).all(|j| s.get(i, j) == s.get(j, i)))
}

fn c8_similarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut gip_ok = true;
    let mut sp_ok = true;
    for _ in 0..50 {
        let n = rng.gen_range(1..=15);
        let width = rng.gen_range(1..=20);
        let density = rng.gen_range(0.0..1.0);
        let profiles: Vec<InteractionProfile> = (0..n)
            .map(|_| InteractionProfile {
                vector: (0..width).map(|_| u8::from(rng.gen_bool(density))).collect(),
                owner_class: EntityClass::Microbe,
            })
            .collect();
        let gamma = rng.gen_range(0.01..5.0);
        let k = gip_kernel(&profiles, gamma, EntityClass::Microbe);
        gip_ok &= symmetric_unit_diag(&k) && k.values().iter().all(|&v| v > 0.0 && v <= 1.0);

        let seqs: Vec<Vec<u8>> = (0..rng.gen_range(1..=12))
            .map(|_| (0..rng.gen_range(2..=9)).map(|_| *AMINO.choose(&mut rng).unwrap()).collect())
            .collect();
        let refs: Vec<&[u8]> = seqs.iter().map(Vec::as_slice).collect();
        let sp = peptide_similarity_from_sequences(&refs, &AlignmentParams::default()).unwrap();
        sp_ok &= symmetric_unit_diag(&sp) && sp.values().iter().all(|&v| (0.0..=1.0).contains(&v));
    }
    outcome(gip_ok && sp_ok, format!("50 random inputs each; GIP properties hold: {gip_ok}, S_p properties hold: {sp_ok}"))
}

fn mean_auroc(r: &MetricsReport) -> f64 {
    r.mean.auroc.unwrap_or(f64::NAN)
}

fn mean_auprc(r: &MetricsReport) -> f64 {
    r.mean.auprc.unwrap_or(f64::NAN)
}

fn c5_synthetic(full: &mut Option<MetricsReport>) -> Outcome {
    let cfg = benchmark_config();
    let graph = benchmark_graph(&cfg);
    let report = run_cross_validation(&graph, &cfg).unwrap();
    let (roc, pr) = (mean_auroc(&report), mean_auprc(&report));
    let folds = report.folds.len();
    *full = Some(report);
    outcome(
        folds == 25 && roc >= 0.85 && pr >= 0.80,
        format!("5 folds x 5 repetitions, mean AUROC {roc:.4} (>= 0.85), mean AUPRC {pr:.4} (>= 0.80)"),
    )
}

fn c6_imbalance(at_one: Option<&MetricsReport>) -> Outcome {
    let base = benchmark_config();
    let graph = benchmark_graph(&base);
    let mut values = Vec::new();
    for ratio in [1.0, 2.0, 5.0, 10.0] {
        let v = match at_one {
            Some(r) if ratio == 1.0 => mean_auprc(r),
            _ => mean_auprc(&run_cross_validation(&graph, &RunConfig { ratio, ..base.clone() }).unwrap()),
        };
        values.push(v);
    }
    let strict = values.windows(2).all(|w| w[0] > w[1]);
    let shown = values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(" > ");
    let reused = if at_one.is_some() { ", 1:1 run shared with criterion 5" } else { "" };
    outcome(strict, format!("mean AUPRC at 1:1, 1:2, 1:5, 1:10: {shown}{reused}"))
}

fn c9_ablation(full: Option<&MetricsReport>) -> Outcome {
    let cfg = benchmark_config();
    let graph = benchmark_graph(&cfg);
    let full_roc = match full {
        Some(r) => mean_auroc(r),
        None => mean_auroc(&run_cross_validation(&graph, &cfg).unwrap()),
    };
    let ablated = run_cross_validation(&graph, &RunConfig { contrastive: false, ..cfg }).unwrap();
    let roc = mean_auroc(&ablated);
    outcome(roc < full_roc, format!("mean AUROC full {full_roc:.4}, without contrastive term {roc:.4}"))
}

fn peplink(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_peplink"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("peplink binary runs");
    assert!(out.status.success(), "peplink {args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn c7_determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let dir = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, r#"{"epochs": 60, "k": 5}"#).unwrap();
    let (raw, ing, built) = (dir.join("raw"), dir.join("ingested"), dir.join("built"));
    peplink(&["synth", "--out", &s(&raw)]);
    peplink(&["ingest", "--data", &s(&raw), "--out", &s(&ing), "--config", &s(&cfg)]);
    peplink(&["build", "--ingested", &s(&ing), "--out", &s(&built), "--config", &s(&cfg)]);
    let graph = s(&built.join("graph.json"));
    let (a, b) = (dir.join("a"), dir.join("b"));
    peplink(&["evaluate", "--graph", &graph, "--out", &s(&a), "--config", &s(&cfg), "--seed", "7"]);
    peplink(&["evaluate", "--graph", &graph, "--out", &s(&b), "--config", &s(&cfg), "--seed", "7"]);
    let (x, y) = (std::fs::read(a.join("metrics.json")).unwrap(), std::fs::read(b.join("metrics.json")).unwrap());
    outcome(x == y, format!("two evaluate runs, metrics.json {} bytes, identical: {}", x.len(), x == y))
}

fn main() {
    // Under `cargo test` the harness receives libtest flags; a filter
    // argument that is not "acceptance" skips the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let secs = Duration::from_secs;
    let mut full = None;
    let results = [
        run(1, "alignment oracle", secs(10), c1_alignment_oracle),
        run(2, "gradient suite", secs(60), c2_gradients),
        run(3, "augmentation invariants", secs(30), c3_augmentation),
        run(4, "metric oracle", secs(5), c4_metrics),
        run(5, "synthetic end-to-end", secs(300), || c5_synthetic(&mut full)),
        run(6, "imbalance trend", secs(1200), || c6_imbalance(full.as_ref())),
        run(7, "determinism", secs(600), c7_determinism),
        run(8, "similarity properties", secs(5), c8_similarity),
        run(9, "ablation sanity", secs(600), || c9_ablation(full.as_ref())),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
