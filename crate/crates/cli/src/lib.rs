//! Command-line front end: argument parsing, config resolution and the
//! pipeline stages that read and write the on-disk artifacts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::{json, Map, Value};

use peplink_core::entities::{load_associations, load_entities, redundancy_filter, write_associations, Relation};
use peplink_core::eval::{fit_full_model, rank_candidates, run_cross_validation, run_sweep, write_predictions, write_sweep, SweepAxis};
use peplink_core::graph::{build_association_store, HeteroGraph};
use peplink_core::model::Model;
use peplink_core::similarity::{build_similarities, EntityClass};
use peplink_core::synthetic::SyntheticSpec;
use peplink_core::tensor::Checkpoint;
use peplink_core::RunConfig;

pub const INGEST_FORMAT: &str = "peplink-ingest/v1";
pub const INPUT_TABLES: [&str; 4] = ["peptides.tsv", "microbes.tsv", "diseases.tsv", "associations.tsv"];

#[derive(Debug, Parser)]
#[command(name = "peplink", version, about = "Peptide-disease association prediction on a peptide-microbe-disease graph")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; `PEPLINK_<KEY>` variables and flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (config key `out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonicalize and filter the raw entity and association tables.
    Ingest {
        /// Directory with peptides.tsv, microbes.tsv, diseases.tsv, associations.tsv.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Compute similarities and assemble the heterogeneous graph.
    Build {
        /// Directory written by `ingest` (defaults to the output directory).
        #[arg(long)]
        ingested: Option<PathBuf>,
        /// Also write the peptide, microbe and disease similarity matrices.
        #[arg(long)]
        emit_similarity: bool,
    },
    /// Train on every known association and save a checkpoint.
    Train {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// k-fold cross-validation; writes metrics.json and ROC/PR curves.
    Evaluate {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Rank unobserved peptide-disease pairs with a trained checkpoint.
    Predict {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        top_n: Option<usize>,
    },
    /// Cross-validate over a hyperparameter grid; writes sweep.tsv.
    Sweep {
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        axis: AxisArg,
        /// Comma-separated grid overriding the default for a single axis.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Write the planted synthetic benchmark as input tables.
    Synth {
        /// Synthetic generator settings as a JSON object.
        #[arg(long)]
        spec: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    EmbedDim,
    Tau,
    Ratio,
    All,
}

impl AxisArg {
    fn axes(self) -> Vec<SweepAxis> {
        match self {
            AxisArg::EmbedDim => vec![SweepAxis::EmbedDim],
            AxisArg::Tau => vec![SweepAxis::Tau],
            AxisArg::Ratio => vec![SweepAxis::Ratio],
            AxisArg::All => vec![SweepAxis::EmbedDim, SweepAxis::Tau, SweepAxis::Ratio],
        }
    }
}

impl Command {
    pub fn stage(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Build { .. } => "build",
            Command::Train { .. } => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Predict { .. } => "predict",
            Command::Sweep { .. } => "sweep",
            Command::Synth { .. } => "synth",
        }
    }
}

/// Resolves the run configuration for `cli` from its file, the process
/// environment and the flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut overrides = Map::new();
    if let Some(seed) = cli.global.seed {
        overrides.insert("seed".into(), json!(seed));
    }
    if let Some(out) = &cli.global.out {
        overrides.insert("out_dir".into(), json!(out));
    }
    match &cli.command {
        Command::Ingest { data: Some(d) } => {
            overrides.insert("data_dir".into(), json!(d));
        }
        Command::Predict { top_n: Some(n), .. } => {
            overrides.insert("top_n".into(), json!(n));
        }
        _ => {}
    }
    Ok(RunConfig::resolve(cli.global.config.as_deref(), std::env::vars(), overrides)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli).context("config")?;
    let stage = cli.command.stage();
    let result = match &cli.command {
        Command::Ingest { .. } => cmd_ingest(&cfg),
        Command::Build { ingested, emit_similarity } => cmd_build(&cfg, ingested.as_deref(), *emit_similarity),
        Command::Train { graph } => cmd_train(&cfg, graph.as_deref()),
        Command::Evaluate { graph } => cmd_evaluate(&cfg, graph.as_deref()),
        Command::Predict { graph, checkpoint, .. } => cmd_predict(&cfg, graph.as_deref(), checkpoint.as_deref()),
        Command::Sweep { graph, axis, values } => cmd_sweep(&cfg, graph.as_deref(), *axis, values.as_deref()),
        Command::Synth { spec } => cmd_synth(&cfg, spec.as_deref()),
    };
    result.with_context(|| stage.to_string())
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn graph_path(cfg: &RunConfig, graph: Option<&Path>) -> PathBuf {
    graph.map_or_else(|| cfg.out_dir.join("graph.json"), Path::to_path_buf)
}

fn load_graph(cfg: &RunConfig, graph: Option<&Path>) -> Result<HeteroGraph> {
    let path = graph_path(cfg, graph);
    Ok(HeteroGraph::load(&path)?)
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let Some(data) = &cfg.data_dir else {
        bail!("no input directory; pass --data or set data_dir");
    };
    let paths: Vec<PathBuf> = INPUT_TABLES.iter().map(|t| data.join(t)).collect();
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        bail!("missing input table {}", missing.display());
    }
    let loaded = load_entities(&paths[0], &paths[1], &paths[2])?;
    let mut registry = redundancy_filter(&loaded, cfg.redundancy_threshold, &cfg.alignment)?;
    let associations = load_associations(&paths[3], &mut registry)?;

    let count = |r: Relation| associations.iter().filter(|a| a.relation == r).count();
    let manifest = json!({
        "format": INGEST_FORMAT,
        "peptides": registry.peptides().len(),
        "microbes": registry.microbes().len(),
        "diseases": registry.diseases().len(),
        "edges": {
            "peptide_microbe": count(Relation::PeptideMicrobe),
            "peptide_disease": count(Relation::PeptideDisease),
            "microbe_disease": count(Relation::MicrobeDisease),
        },
    });
    info!(
        "ingested {} peptides ({} dropped), {} microbes, {} diseases, {} associations",
        registry.peptides().len(),
        loaded.peptides().len() - registry.peptides().len(),
        registry.microbes().len(),
        registry.diseases().len(),
        associations.len()
    );

    create_out(&cfg.out_dir)?;
    registry.write_tables(&cfg.out_dir)?;
    write_associations(&cfg.out_dir.join("associations.tsv"), &associations)?;
    registry.write_events(&cfg.out_dir.join("dedup_log.tsv"))?;
    write_json(&cfg.out_dir.join("manifest.json"), &manifest)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_build(cfg: &RunConfig, ingested: Option<&Path>, emit_similarity: bool) -> Result<()> {
    let dir = ingested.unwrap_or(&cfg.out_dir);
    let paths: Vec<PathBuf> = INPUT_TABLES.iter().map(|t| dir.join(t)).collect();
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        bail!("missing ingested table {} (run `ingest` first)", missing.display());
    }
    let mut registry = load_entities(&paths[0], &paths[1], &paths[2])?;
    let associations = load_associations(&paths[3], &mut registry)?;
    let store = build_association_store(&associations, &registry)?;
    let sims = build_similarities(&registry, &store, &cfg.alignment, cfg.gamma_prime, cfg.gip_bandwidth_mode)?;
    let graph = HeteroGraph::build(&sims, &store, &registry)?;
    info!(
        "graph side {} (gamma microbe {}, disease {})",
        graph.side(),
        sims.gamma_microbe,
        sims.gamma_disease
    );

    create_out(&cfg.out_dir)?;
    graph.save(&cfg.out_dir.join("graph.json"))?;
    graph.write_manifest(&cfg.out_dir.join("node_index.tsv"))?;
    if emit_similarity {
        for (class, matrix, file) in [
            (EntityClass::Peptide, &sims.peptide, "similarity_peptide.csv"),
            (EntityClass::Microbe, &sims.microbe, "similarity_microbe.csv"),
            (EntityClass::Disease, &sims.disease, "similarity_disease.csv"),
        ] {
            matrix.write_csv(&cfg.out_dir.join(file), &registry.ids(class))?;
        }
    }
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, graph: Option<&Path>) -> Result<()> {
    let graph = load_graph(cfg, graph)?;
    let (model, history) = fit_full_model(&graph, cfg)?;
    let last = history.last().map(|h| h.total);
    info!("trained {} epochs, final loss {:?}", history.len(), last);
    let meta = json!({
        "base_seed": cfg.seed,
        "epochs": cfg.epochs,
        "final_loss": last,
    });
    create_out(&cfg.out_dir)?;
    let mut log = String::from("epoch\ttotal\tcontrast\tpred\n");
    for h in &history {
        let c = h.contrast.map_or_else(|| "NA".into(), |c| c.to_string());
        log.push_str(&format!("{}\t{}\t{}\t{}\n", h.epoch, h.total, c, h.pred));
    }
    std::fs::write(cfg.out_dir.join("training_log.tsv"), log)?;
    model.to_checkpoint(meta).save(&cfg.out_dir.join("checkpoint.json"))?;
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, graph: Option<&Path>) -> Result<()> {
    let graph = load_graph(cfg, graph)?;
    let report = run_cross_validation(&graph, cfg)?;
    info!("mean AUROC {:?}, AUPRC {:?}", report.mean.auroc, report.mean.auprc);
    create_out(&cfg.out_dir)?;
    report.write(&cfg.out_dir)?;
    Ok(())
}

pub fn cmd_predict(cfg: &RunConfig, graph: Option<&Path>, checkpoint: Option<&Path>) -> Result<()> {
    let graph = load_graph(cfg, graph)?;
    let ckpt_path = checkpoint.map_or_else(|| cfg.out_dir.join("checkpoint.json"), Path::to_path_buf);
    let model = Model::from_checkpoint(&Checkpoint::load(&ckpt_path)?)?;
    if model.input_dim() != graph.side() {
        bail!(
            "checkpoint expects {} nodes but the graph has {}",
            model.input_dim(),
            graph.side()
        );
    }
    let rows = rank_candidates(&model, &graph, cfg.top_n)?;
    create_out(&cfg.out_dir)?;
    write_predictions(&cfg.out_dir.join("predictions.tsv"), &rows)?;
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig, graph: Option<&Path>, axis: AxisArg, values: Option<&[f64]>) -> Result<()> {
    if values.is_some() && axis == AxisArg::All {
        bail!("--values needs a single --axis");
    }
    let graph = load_graph(cfg, graph)?;
    let grids: Vec<(SweepAxis, Vec<f64>)> = axis
        .axes()
        .into_iter()
        .map(|a| (a, values.map_or_else(|| a.default_grid(), <[f64]>::to_vec)))
        .collect();
    // Reject bad grid points before any training starts.
    for (a, vals) in &grids {
        for &v in vals {
            a.apply(cfg, v)?;
        }
    }
    let mut rows = Vec::new();
    for (a, vals) in &grids {
        rows.extend(run_sweep(&graph, cfg, *a, vals)?);
    }
    create_out(&cfg.out_dir)?;
    write_sweep(&cfg.out_dir.join("sweep.tsv"), &rows)?;
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, spec: Option<&str>) -> Result<()> {
    // The run seed applies unless the spec sets its own.
    let mut merged = serde_json::to_value(SyntheticSpec {
        seed: cfg.seed,
        ..SyntheticSpec::default()
    })?;
    if let Some(s) = spec {
        let overrides: Map<String, Value> = serde_json::from_str(s).context("parsing --spec")?;
        for (k, v) in overrides {
            merged[k] = v;
        }
    }
    let spec: SyntheticSpec = serde_json::from_value(merged).context("parsing --spec")?;
    let data = spec.generate()?;
    data.write(&cfg.out_dir)?;
    Ok(())
}
