use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_folds, FoldPlan};
use super::metrics::{compute_metrics, pr_curve, roc_curve, Metrics};
use crate::augment::{compute_prompt_scores, select_prompt_nodes, PromptSet};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::model::{train, Model, TrainingSet};
use crate::rng::{derive_seed, STREAM_FOLDS, STREAM_INIT};
use crate::similarity::EntityClass;

pub const METRICS_FORMAT: &str = "peplink-metrics/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repetition: usize,
    pub fold: usize,
    pub train_pairs: usize,
    pub test_positives: usize,
    pub test_negatives: usize,
    pub final_loss: f64,
    pub metrics: Metrics,
    /// `(fpr, tpr)`; written to CSV rather than JSON.
    #[serde(skip)]
    pub roc: Vec<(f64, f64)>,
    /// `(recall, precision)`.
    #[serde(skip)]
    pub pr: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub f1: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let m = mean(values.clone())?;
    mean(values.map(|x| (x - m).powi(2))).map(f64::sqrt)
}

impl Summary {
    fn over(folds: &[FoldResult], reduce: impl Fn(&mut dyn Iterator<Item = f64>) -> Option<f64>) -> Self {
        let get = |f: &dyn Fn(&Metrics) -> Option<f64>| reduce(&mut folds.iter().filter_map(|r| f(&r.metrics)));
        Self {
            auroc: get(&|m| m.auroc),
            auprc: get(&|m| m.auprc),
            f1: get(&|m| Some(m.f1)).unwrap_or(0.0),
            accuracy: get(&|m| Some(m.accuracy)).unwrap_or(0.0),
            recall: get(&|m| Some(m.recall)).unwrap_or(0.0),
            precision: get(&|m| Some(m.precision)).unwrap_or(0.0),
        }
    }

    pub fn mean_of(folds: &[FoldResult]) -> Self {
        Self::over(folds, &|it: &mut dyn Iterator<Item = f64>| mean(it))
    }

    pub fn std_of(folds: &[FoldResult]) -> Self {
        Self::over(folds, &|it: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = it.collect();
            std_dev(v.into_iter())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    pub base_seed: u64,
    pub threshold: f64,
    pub k: usize,
    pub ratio: f64,
    pub repetitions: usize,
    /// Node and positive-edge counts of the evaluated graph.
    pub graph: BTreeMap<String, usize>,
    /// Resolved run configuration, output location excluded.
    pub config: serde_json::Value,
    pub folds: Vec<FoldResult>,
    pub mean: Summary,
    pub std: Summary,
}

pub fn prompt_set(graph: &HeteroGraph, tau: f64) -> PromptSet {
    select_prompt_nodes(&compute_prompt_scores(&graph.similarity(EntityClass::Peptide)), tau)
}

fn run_fold(graph: &HeteroGraph, plan: &FoldPlan, fold: usize, repetition: usize, prompts: &PromptSet, cfg: &RunConfig) -> Result<FoldResult> {
    let held_out = plan.test_positives(fold);
    let adjacency = graph.masked_adjacency(&held_out);
    let (train_pairs, train_labels) = plan.train_set(fold);
    let n_train = train_pairs.len();
    let set = TrainingSet::new(graph, adjacency.clone(), prompts.clone(), &train_pairs, train_labels)?;
    let seed = derive_seed(cfg.seed, &[STREAM_INIT, repetition as u64, fold as u64]);
    let mut model = Model::new(cfg.model_config(), graph.side(), seed)?;
    let history = train(&mut model, &set, &cfg.train_config(seed))?;
    let (test_pairs, test_labels) = plan.test_set(fold);
    let scores = model.predict_local(graph, &adjacency, &test_pairs)?;
    let labels: Vec<bool> = test_labels.iter().map(|&y| y == 1.0).collect();
    let metrics = compute_metrics(&scores, &labels, cfg.threshold)?;
    info!(
        "repetition {repetition} fold {fold}: auroc {:?} auprc {:?}",
        metrics.auroc, metrics.auprc
    );
    Ok(FoldResult {
        repetition,
        fold,
        train_pairs: n_train,
        test_positives: held_out.len(),
        test_negatives: test_pairs.len() - held_out.len(),
        final_loss: history.last().map_or(f64::NAN, |h| h.total),
        roc: roc_curve(&scores, &labels)?,
        pr: pr_curve(&scores, &labels)?,
        metrics,
    })
}

/// k-fold cross-validation, repeated with freshly drawn folds and negatives.
/// Folds train concurrently; results keep (repetition, fold) order.
pub fn run_cross_validation(graph: &HeteroGraph, cfg: &RunConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let store = graph.association_store();
    let prompts = prompt_set(graph, cfg.tau);
    let mut folds = Vec::with_capacity(cfg.k * cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let plan = make_folds(&store, cfg.k, cfg.ratio, derive_seed(cfg.seed, &[STREAM_FOLDS, rep as u64]))?;
        let results: Vec<FoldResult> = (0..cfg.k)
            .into_par_iter()
            .map(|f| run_fold(graph, &plan, f, rep, &prompts, cfg))
            .collect::<Result<_>>()?;
        folds.extend(results);
    }
    let (np, nm, nd) = graph.counts();
    let (pm, pd, md) = (
        store.peptide_microbe().count_ones(),
        store.peptide_disease().count_ones(),
        store.microbe_disease().count_ones(),
    );
    let graph_counts = [
        ("peptides", np),
        ("microbes", nm),
        ("diseases", nd),
        ("peptide_microbe_edges", pm),
        ("peptide_disease_edges", pd),
        ("microbe_disease_edges", md),
        ("prompt_nodes", prompts.len()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut config = serde_json::to_value(cfg).map_err(|e| Error::Internal(e.to_string()))?;
    if let serde_json::Value::Object(m) = &mut config {
        m.remove("out_dir");
    }
    Ok(MetricsReport {
        format: METRICS_FORMAT.into(),
        base_seed: cfg.seed,
        threshold: cfg.threshold,
        k: cfg.k,
        ratio: cfg.ratio,
        repetitions: cfg.repetitions,
        graph: graph_counts,
        config,
        mean: Summary::mean_of(&folds),
        std: Summary::std_of(&folds),
        folds,
    })
}

fn write_curve(path: &Path, header: &str, points: &[(f64, f64)]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for (a, b) in points {
            writeln!(w, "{a},{b}")?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

impl MetricsReport {
    /// Writes `metrics.json` and per-fold `roc`/`pr` CSVs under `curves/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("curves")).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("metrics.json");
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        for f in &self.folds {
            let stem = format!("rep{}_fold{}", f.repetition, f.fold);
            write_curve(&dir.join("curves").join(format!("{stem}_roc.csv")), "fpr,tpr", &f.roc)?;
            write_curve(&dir.join("curves").join(format!("{stem}_pr.csv")), "recall,precision", &f.pr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    EmbedDim,
    Tau,
    Ratio,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::EmbedDim => "embed_dim",
            SweepAxis::Tau => "tau",
            SweepAxis::Ratio => "ratio",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepAxis::EmbedDim => vec![32.0, 64.0, 128.0, 256.0, 512.0],
            SweepAxis::Tau => vec![0.3, 0.4, 0.5, 0.6, 0.7],
            SweepAxis::Ratio => vec![1.0, 2.0, 5.0, 10.0],
        }
    }

    pub fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::EmbedDim => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("embed_dim {value} is not a positive integer")));
                }
                c.embed_dim = value as usize;
            }
            SweepAxis::Tau => c.tau = value,
            SweepAxis::Ratio => c.ratio = value,
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub mean: Summary,
}

/// One cross-validation run per grid value; every run uses the base seed.
pub fn run_sweep(graph: &HeteroGraph, cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    let configs: Vec<RunConfig> = values.iter().map(|&v| axis.apply(cfg, v)).collect::<Result<_>>()?;
    configs
        .iter()
        .zip(values)
        .map(|(c, &value)| {
            let report = run_cross_validation(graph, c)?;
            Ok(SweepRow {
                parameter: axis.as_str().into(),
                value,
                mean: report.mean,
            })
        })
        .collect()
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    let mut emit = || -> std::io::Result<()> {
        writeln!(w, "parameter\tvalue\tauroc\tauprc\tf1\taccuracy\trecall\tprecision")?;
        for r in rows {
            let m = &r.mean;
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.parameter,
                r.value,
                opt(m.auroc),
                opt(m.auprc),
                m.f1,
                m.accuracy,
                m.recall,
                m.precision
            )?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}
