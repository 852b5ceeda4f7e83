use log::debug;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{contrastive_loss, encode, normalized_adjacency, predict_pairs, prediction_loss, total_loss, Model};
use crate::augment::{augment_adjacency, PerturbScope, PromptSet};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::rng::{derive_seed, rng_for, STREAM_AUGMENT, STREAM_SUPERVISION};
use crate::similarity::EntityClass;
use crate::tensor::{Adam, AdamConfig, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    pub lambda: f64,
    /// When false the objective is `lambda * L_pred` alone.
    pub contrastive: bool,
    pub drop_rate: f64,
    pub perturb_scope: PerturbScope,
    /// Fraction of labelled pairs supervised per epoch. The supervised
    /// positives are hidden from that epoch's encoder input so the model
    /// cannot read a target edge off its own features; `1.0` supervises
    /// every pair and hides nothing.
    pub target_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            adam: AdamConfig::default(),
            lambda: 1.0,
            contrastive: true,
            drop_rate: 0.2,
            perturb_scope: PerturbScope::All,
            target_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Everything one training context needs, with pairs already mapped to
/// global node indices.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub adjacency: Tensor,
    pub counts: (usize, usize, usize),
    pub prompts: PromptSet,
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<f64>,
}

impl TrainingSet {
    /// `pairs` are local (peptide, disease) indices; `adjacency` is the
    /// (masked) matrix the encoders see.
    pub fn new(graph: &HeteroGraph, adjacency: Tensor, prompts: PromptSet, pairs: &[(usize, usize)], labels: Vec<f64>) -> Result<Self> {
        let (np, nm, nd) = graph.counts();
        if pairs.len() != labels.len() {
            return Err(Error::shape("training_set", format!("{} pairs vs {} labels", pairs.len(), labels.len())));
        }
        let global = pairs
            .iter()
            .map(|&(p, d)| {
                if p < np && d < nd {
                    Ok((graph.global_index(EntityClass::Peptide, p), graph.global_index(EntityClass::Disease, d)))
                } else {
                    Err(Error::Index(format!("pair ({p}, {d}) outside {np} peptides x {nd} diseases")))
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            adjacency,
            counts: (np, nm, nd),
            prompts,
            pairs: global,
            labels,
        })
    }

    fn class_of(&self, node: usize) -> EntityClass {
        let (np, nm, _) = self.counts;
        if node < np {
            EntityClass::Peptide
        } else if node < np + nm {
            EntityClass::Microbe
        } else {
            EntityClass::Disease
        }
    }
}

/// Inputs of one loss evaluation: both views as feature and normalized
/// adjacency matrices plus the labelled pairs.
#[derive(Debug, Clone)]
pub struct LossInputs {
    pub features: Tensor,
    pub a_hat: Tensor,
    /// `None` disables the contrastive term.
    pub augmented: Option<(Tensor, Tensor)>,
    pub pairs: Vec<(usize, usize)>,
    pub labels: Vec<f64>,
    pub lambda: f64,
}

impl LossInputs {
    pub fn new(adjacency: &Tensor, augmented: Option<&Tensor>, pairs: Vec<(usize, usize)>, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        let augmented = match augmented {
            Some(m) => Some((m.clone(), normalized_adjacency(m)?)),
            None => None,
        };
        Ok(Self {
            features: adjacency.clone(),
            a_hat: normalized_adjacency(adjacency)?,
            augmented,
            pairs,
            labels,
            lambda,
        })
    }
}

pub struct LossParts<'t> {
    pub total: Var<'t>,
    pub contrast: Option<Var<'t>>,
    pub pred: Var<'t>,
}

impl Model {
    /// Builds the full objective on the tape that owns `vars`.
    pub fn loss<'t>(&self, vars: &[Var<'t>], inputs: &LossInputs) -> Result<LossParts<'t>> {
        let tape = vars.first().ok_or_else(|| Error::Internal("model has no parameters".into()))?.tape();
        let bound = self.bind(vars);
        let x = tape.constant(inputs.features.clone());
        let a_hat = tape.constant(inputs.a_hat.clone());
        let emb = encode(&bound, a_hat, x)?;
        let y_hat = predict_pairs(&bound, emb.z, &inputs.pairs)?;
        let pred = prediction_loss(y_hat, &inputs.labels)?;
        match &inputs.augmented {
            Some((m_tilde, a_tilde)) => {
                let aug = encode(&bound, tape.constant(a_tilde.clone()), tape.constant(m_tilde.clone()))?;
                let contrast = contrastive_loss(&bound, emb.z, aug.z, emb.z_g)?;
                Ok(LossParts {
                    total: total_loss(contrast, pred, inputs.lambda)?,
                    contrast: Some(contrast),
                    pred,
                })
            }
            None => Ok(LossParts {
                total: pred.scale(inputs.lambda)?,
                contrast: None,
                pred,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub contrast: Option<f64>,
    pub pred: f64,
}

/// One optimizer step per epoch, each on a freshly drawn augmented view.
pub fn train(model: &mut Model, set: &TrainingSet, cfg: &TrainConfig) -> Result<Vec<EpochLoss>> {
    cfg.adam.validate()?;
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::Config(format!("lambda {} must be finite and non-negative", cfg.lambda)));
    }
    if set.adjacency.shape() != [model.input_dim(), model.input_dim()] {
        return Err(Error::shape(
            "train",
            format!("adjacency {:?} vs model input {}", set.adjacency.shape(), model.input_dim()),
        ));
    }
    if !(cfg.target_fraction > 0.0 && cfg.target_fraction <= 1.0) {
        return Err(Error::Config(format!("target_fraction {} outside (0, 1]", cfg.target_fraction)));
    }
    let positives: Vec<usize> = (0..set.labels.len()).filter(|&i| set.labels[i] == 1.0).collect();
    let negatives: Vec<usize> = (0..set.labels.len()).filter(|&i| set.labels[i] != 1.0).collect();
    let full_a_hat = normalized_adjacency(&set.adjacency)?;
    let mut adam = Adam::new(cfg.adam, model.params());
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (adjacency, a_hat, pairs, labels) = if cfg.target_fraction < 1.0 {
            let mut rng = rng_for(cfg.seed, &[STREAM_SUPERVISION, epoch as u64]);
            let take = |rng: &mut crate::rng::Rng, from: &[usize]| -> Vec<usize> {
                let n = ((cfg.target_fraction * from.len() as f64).round() as usize).clamp(usize::from(!from.is_empty()), from.len());
                let mut picked: Vec<usize> = index::sample(rng, from.len(), n).into_iter().map(|i| from[i]).collect();
                picked.sort_unstable();
                picked
            };
            let pos = take(&mut rng, &positives);
            let neg = take(&mut rng, &negatives);
            let mut m = set.adjacency.clone();
            for &i in &pos {
                let (a, b) = set.pairs[i];
                m.set(a, b, 0.0);
                m.set(b, a, 0.0);
            }
            let chosen: Vec<usize> = pos.into_iter().chain(neg).collect();
            let a_hat = normalized_adjacency(&m)?;
            (
                m,
                a_hat,
                chosen.iter().map(|&i| set.pairs[i]).collect(),
                chosen.iter().map(|&i| set.labels[i]).collect(),
            )
        } else {
            (set.adjacency.clone(), full_a_hat.clone(), set.pairs.clone(), set.labels.clone())
        };
        let augmented = if cfg.contrastive {
            let seed = derive_seed(cfg.seed, &[STREAM_AUGMENT, epoch as u64]);
            let view = augment_adjacency(&adjacency, |i| set.class_of(i), &set.prompts, cfg.drop_rate, cfg.perturb_scope, seed)?;
            let a_tilde = normalized_adjacency(&view.adjacency)?;
            Some((view.adjacency, a_tilde))
        } else {
            None
        };
        let inputs = LossInputs {
            features: adjacency,
            a_hat,
            augmented,
            pairs,
            labels,
            lambda: cfg.lambda,
        };
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = model.params().iter().map(|p| tape.param(p.clone())).collect();
        let parts = model.loss(&vars, &inputs)?;
        tape.backward(parts.total)?;
        let grads: Vec<Tensor> = vars
            .iter()
            .map(|v| tape.grad(*v).unwrap_or_else(|| Tensor::zeros(&v.shape())))
            .collect();
        let record = EpochLoss {
            epoch,
            total: parts.total.item(),
            contrast: parts.contrast.map(|c| c.item()),
            pred: parts.pred.item(),
        };
        if !record.total.is_finite() {
            return Err(Error::Internal(format!("non-finite loss at epoch {epoch}")));
        }
        drop(tape);
        adam.step(model.params_mut(), &grads)?;
        debug!("epoch {epoch}: total {:.6} pred {:.6}", record.total, record.pred);
        history.push(record);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use std::collections::BTreeSet;

    fn tiny() -> (Tensor, Vec<(usize, usize)>, Vec<f64>) {
        let n = 6;
        let mut a = Tensor::identity(n);
        for (i, j) in [(0, 2), (1, 3), (2, 4), (3, 5), (0, 1), (4, 5)] {
            a.set(i, j, 1.0);
            a.set(j, i, 1.0);
        }
        (a, vec![(0, 4), (1, 5), (0, 5), (1, 4)], vec![1.0, 1.0, 0.0, 0.0])
    }

    fn small_model() -> Model {
        let cfg = ModelConfig { embed_dim: 4, attn_heads: 2, mlp_hidden: 4, ..Default::default() };
        Model::new(cfg, 6, 5).unwrap()
    }

    #[test]
    fn contrastive_loss_decreases_on_fixed_views() {
        let (a, _, _) = tiny();
        let mut aug = a.clone();
        for (i, j) in [(0, 2), (3, 5)] {
            aug.set(i, j, 0.0);
            aug.set(j, i, 0.0);
        }
        let mut model = small_model();
        let inputs = LossInputs::new(&a, Some(&aug), vec![(0, 4)], vec![1.0], 0.0).unwrap();
        let mut adam = Adam::new(AdamConfig { lr: 0.01, ..Default::default() }, model.params());
        let mut losses = Vec::new();
        for _ in 0..50 {
            let tape = Tape::new();
            let vars: Vec<Var> = model.params().iter().map(|p| tape.param(p.clone())).collect();
            let parts = model.loss(&vars, &inputs).unwrap();
            tape.backward(parts.total).unwrap();
            let grads: Vec<Tensor> = vars.iter().map(|v| tape.grad(*v).unwrap_or_else(|| Tensor::zeros(&v.shape()))).collect();
            losses.push(parts.contrast.unwrap().item());
            drop(tape);
            adam.step(model.params_mut(), &grads).unwrap();
        }
        assert!(losses[49] < losses[0], "{} -> {}", losses[0], losses[49]);
    }

    fn set() -> TrainingSet {
        let (a, pairs, labels) = tiny();
        TrainingSet {
            adjacency: a,
            counts: (2, 2, 2),
            prompts: PromptSet { scores: vec![0.0; 2], members: BTreeSet::new(), tau: 0.4 },
            pairs,
            labels,
        }
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let cfg = TrainConfig {
            epochs: 40,
            adam: AdamConfig { lr: 0.01, ..Default::default() },
            drop_rate: 0.3,
            seed: 9,
            ..Default::default()
        };
        let mut m1 = small_model();
        let mut m2 = small_model();
        let h1 = train(&mut m1, &set(), &cfg).unwrap();
        let h2 = train(&mut m2, &set(), &cfg).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(m1.params(), m2.params());
        assert!(h1[39].pred < h1[0].pred);
    }

    #[test]
    fn without_contrast_total_is_scaled_prediction_loss() {
        let cfg = TrainConfig { epochs: 3, contrastive: false, lambda: 2.0, ..Default::default() };
        let mut m = small_model();
        let h = train(&mut m, &set(), &cfg).unwrap();
        for e in h {
            assert!(e.contrast.is_none());
            assert!((e.total - 2.0 * e.pred).abs() < 1e-15);
        }
    }
}
