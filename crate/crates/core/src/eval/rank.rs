use std::path::Path;

use serde::{Deserialize, Serialize};

use super::folds::{labelled, sample_negatives};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::model::{train, EpochLoss, Model, TrainingSet};
use crate::rng::{rng_for, STREAM_TRAIN_NEGATIVES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub rank: usize,
    pub peptide_index: usize,
    pub disease_index: usize,
    pub peptide_id: String,
    pub peptide_sequence: String,
    pub disease_id: String,
    pub disease_name: String,
    pub score: f64,
    /// Microbe ids associated with both the peptide and the disease.
    pub linking_microbes: Vec<String>,
}

/// Trains on every known positive plus `ratio` times as many sampled
/// unobserved pairs, with the unmasked graph as input.
pub fn fit_full_model(graph: &HeteroGraph, cfg: &RunConfig) -> Result<(Model, Vec<EpochLoss>)> {
    cfg.validate()?;
    let store = graph.association_store();
    let positives: Vec<(usize, usize)> = store.peptide_disease().ones().collect();
    if positives.is_empty() {
        return Err(Error::Config("no peptide-disease positives to train on".into()));
    }
    let negatives = sample_negatives(&store, cfg.ratio, &mut rng_for(cfg.seed, &[STREAM_TRAIN_NEGATIVES]))?;
    let (pairs, labels) = labelled(positives, negatives);
    let prompts = super::cv::prompt_set(graph, cfg.tau);
    let set = TrainingSet::new(graph, graph.adjacency().clone(), prompts, &pairs, labels)?;
    let mut model = Model::new(cfg.model_config(), graph.side(), cfg.seed)?;
    let history = train(&mut model, &set, &cfg.train_config(cfg.seed))?;
    Ok((model, history))
}

/// Scores every unobserved peptide-disease pair and returns the best
/// `top_n`, ties broken by peptide then disease index.
pub fn rank_candidates(model: &Model, graph: &HeteroGraph, top_n: usize) -> Result<Vec<Candidate>> {
    let store = graph.association_store();
    let pairs: Vec<(usize, usize)> = store.peptide_disease().zeros_iter().collect();
    let scores = model.predict_local(graph, graph.adjacency(), &pairs)?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    // Stable sort keeps the row-major (peptide, disease) order among ties.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let e = graph.entities();
    Ok(order
        .into_iter()
        .take(top_n)
        .enumerate()
        .map(|(r, i)| {
            let (p, d) = pairs[i];
            Candidate {
                rank: r + 1,
                peptide_index: p,
                disease_index: d,
                peptide_id: e.peptides[p].id.clone(),
                peptide_sequence: e.peptides[p].sequence.clone(),
                disease_id: e.diseases[d].id.clone(),
                disease_name: e.diseases[d].name.clone(),
                score: scores[i],
                linking_microbes: store.linking_microbes(p, d).into_iter().map(|m| e.microbes[m].id.clone()).collect(),
            }
        })
        .collect())
}

pub const PREDICTIONS_HEADER: [&str; 7] = [
    "rank",
    "peptide_id",
    "peptide_sequence",
    "disease_id",
    "disease_name",
    "score",
    "linking_microbes",
];

/// Linking microbes are `;`-separated, `-` when there are none.
pub fn write_predictions(path: &Path, rows: &[Candidate]) -> Result<()> {
    let owned: Vec<[String; 7]> = rows
        .iter()
        .map(|c| {
            [
                c.rank.to_string(),
                c.peptide_id.clone(),
                c.peptide_sequence.clone(),
                c.disease_id.clone(),
                c.disease_name.clone(),
                c.score.to_string(),
                if c.linking_microbes.is_empty() {
                    "-".into()
                } else {
                    c.linking_microbes.join(";")
                },
            ]
        })
        .collect();
    crate::entities::write_tsv(path, &PREDICTIONS_HEADER, owned.iter().map(|r| r.iter().map(String::as_str).collect()))
}
