//! Dual GCN + Transformer encoder, contrastive discriminator and the
//! peptide-disease association predictor.

mod encoder;
mod heads;
mod train;

pub use encoder::{encode, gcn_encode, normalized_adjacency, transformer_encode, Embeddings, TransformerOutput};
pub use heads::{contrastive_loss, discriminate, predict_pairs, prediction_loss, total_loss};
pub use train::{train, EpochLoss, LossInputs, LossParts, TrainConfig, TrainingSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::rng::{rng_for, STREAM_INIT};
use crate::tensor::{Checkpoint, Tape, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub gcn_layers: usize,
    pub attn_heads: usize,
    pub mlp_hidden: usize,
    pub gcn_activation: Activation,
    pub use_gcn: bool,
    pub use_transformer: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 128,
            gcn_layers: 2,
            attn_heads: 4,
            mlp_hidden: 64,
            gcn_activation: Activation::Relu,
            use_gcn: true,
            use_transformer: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.mlp_hidden == 0 || self.attn_heads == 0 || self.gcn_layers == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.embed_dim % self.attn_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} is not divisible by attn_heads {}",
                self.embed_dim, self.attn_heads
            )));
        }
        if !self.use_gcn && !self.use_transformer {
            return Err(Error::Config("at least one encoder must be enabled".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.attn_heads
    }

    /// Width of a node embedding: GCN half plus Transformer half.
    pub fn node_dim(&self) -> usize {
        2 * self.embed_dim
    }

    fn ff_hidden(&self) -> usize {
        2 * self.embed_dim
    }
}

/// Positions of each parameter block in [`Model::params`].
#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    pub gcn: Vec<usize>,
    pub input_proj: usize,
    pub query: Vec<usize>,
    pub key: Vec<usize>,
    pub value: Vec<usize>,
    pub attn_out: usize,
    pub ln1: (usize, usize),
    pub ff1: (usize, usize),
    pub ff2: (usize, usize),
    pub ln2: (usize, usize),
    pub disc: (usize, usize),
    pub pred1: (usize, usize),
    pub pred2: (usize, usize),
}

/// Parameter tensors bound to one tape.
pub struct Bound<'a, 't> {
    pub(crate) vars: &'a [Var<'t>],
    pub(crate) layout: &'a Layout,
    pub(crate) config: &'a ModelConfig,
}

impl<'t> Bound<'_, 't> {
    pub(crate) fn p(&self, i: usize) -> Var<'t> {
        self.vars[i]
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    input_dim: usize,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect()).expect("dims")
}

impl Model {
    /// Builds a model with Glorot-uniform weights drawn from `seed`; biases
    /// start at zero and layer-norm gains at one.
    pub fn new(config: ModelConfig, input_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input_dim must be positive".into()));
        }
        let mut rng = rng_for(seed, &[STREAM_INIT]);
        let e = config.embed_dim;
        let dh = config.head_dim();
        let mut names = Vec::new();
        let mut params = Vec::new();
        let mut add = |name: String, t: Tensor| {
            names.push(name);
            params.push(t);
            params.len() - 1
        };
        let mut layout = Layout::default();
        for l in 0..config.gcn_layers {
            let fan_in = if l == 0 { input_dim } else { e };
            layout.gcn.push(add(format!("gcn.{l}.weight"), glorot(&mut rng, fan_in, e)));
        }
        layout.input_proj = add("transformer.input_proj".into(), glorot(&mut rng, input_dim, e));
        for h in 0..config.attn_heads {
            layout.query.push(add(format!("transformer.head.{h}.query"), glorot(&mut rng, e, dh)));
            layout.key.push(add(format!("transformer.head.{h}.key"), glorot(&mut rng, e, dh)));
            layout.value.push(add(format!("transformer.head.{h}.value"), glorot(&mut rng, e, dh)));
        }
        layout.attn_out = add("transformer.attn_out".into(), glorot(&mut rng, e, e));
        layout.ln1 = (
            add("transformer.ln1.gain".into(), Tensor::full(&[1, e], 1.0)),
            add("transformer.ln1.bias".into(), Tensor::zeros(&[1, e])),
        );
        let ff = config.ff_hidden();
        layout.ff1 = (
            add("transformer.ff1.weight".into(), glorot(&mut rng, e, ff)),
            add("transformer.ff1.bias".into(), Tensor::zeros(&[1, ff])),
        );
        layout.ff2 = (
            add("transformer.ff2.weight".into(), glorot(&mut rng, ff, e)),
            add("transformer.ff2.bias".into(), Tensor::zeros(&[1, e])),
        );
        layout.ln2 = (
            add("transformer.ln2.gain".into(), Tensor::full(&[1, e], 1.0)),
            add("transformer.ln2.bias".into(), Tensor::zeros(&[1, e])),
        );
        let node = config.node_dim();
        layout.disc = (
            add("discriminator.weight".into(), glorot(&mut rng, 2 * node, 1)),
            add("discriminator.bias".into(), Tensor::zeros(&[1, 1])),
        );
        layout.pred1 = (
            add("predictor.hidden.weight".into(), glorot(&mut rng, 2 * node, config.mlp_hidden)),
            add("predictor.hidden.bias".into(), Tensor::zeros(&[1, config.mlp_hidden])),
        );
        layout.pred2 = (
            add("predictor.out.weight".into(), glorot(&mut rng, config.mlp_hidden, 1)),
            add("predictor.out.bias".into(), Tensor::zeros(&[1, 1])),
        );
        Ok(Self {
            config,
            input_dim,
            names,
            params,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    /// Replaces a parameter block; the shape must match.
    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Index(format!("no parameter named `{name}`")))?;
        if self.params[i].shape() != value.shape() {
            return Err(Error::shape(
                "set_param",
                format!("{name}: {:?} vs {:?}", self.params[i].shape(), value.shape()),
            ));
        }
        self.params[i] = value;
        Ok(())
    }

    /// Names of the parameter blocks that belong to each component.
    pub fn blocks(&self) -> Vec<(&'static str, Vec<usize>)> {
        let prefix = |p: &str| -> Vec<usize> {
            self.names
                .iter()
                .enumerate()
                .filter(|(_, n)| n.starts_with(p))
                .map(|(i, _)| i)
                .collect()
        };
        vec![
            ("gcn", prefix("gcn.")),
            ("transformer", prefix("transformer.")),
            ("discriminator", prefix("discriminator.")),
            ("predictor", prefix("predictor.")),
        ]
    }

    pub fn bind<'a, 't>(&'a self, vars: &'a [Var<'t>]) -> Bound<'a, 't> {
        Bound {
            vars,
            layout: &self.layout,
            config: &self.config,
        }
    }

    /// Embeds every node of a (possibly masked) adjacency with frozen weights.
    pub fn embed(&self, adjacency: &Tensor) -> Result<Tensor> {
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let bound = self.bind(&vars);
        let x = tape.constant(adjacency.clone());
        let a_hat = tape.constant(normalized_adjacency(adjacency)?);
        Ok(encode(&bound, a_hat, x)?.z.value())
    }

    /// Association probabilities for `(peptide, disease)` pairs of global
    /// node indices, from precomputed embeddings.
    pub fn score_pairs(&self, embeddings: &Tensor, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let tape = Tape::new();
        let vars: Vec<Var<'_>> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let bound = self.bind(&vars);
        let z = tape.constant(embeddings.clone());
        Ok(predict_pairs(&bound, z, pairs)?.value().into_data())
    }

    /// Scores pairs given as local peptide/disease indices of `graph`.
    pub fn predict_local(&self, graph: &HeteroGraph, adjacency: &Tensor, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        use crate::similarity::EntityClass;
        let (np, _, nd) = graph.counts();
        let global: Vec<(usize, usize)> = pairs
            .iter()
            .map(|&(p, d)| {
                if p >= np || d >= nd {
                    Err(Error::Index(format!("pair ({p}, {d}) outside {np} peptides x {nd} diseases")))
                } else {
                    Ok((graph.global_index(EntityClass::Peptide, p), graph.global_index(EntityClass::Disease, d)))
                }
            })
            .collect::<Result<_>>()?;
        let z = self.embed(adjacency)?;
        self.score_pairs(&z, &global)
    }

    pub fn to_checkpoint(&self, mut meta: serde_json::Value) -> Checkpoint {
        if let serde_json::Value::Object(map) = &mut meta {
            map.insert("model".into(), serde_json::to_value(&self.config).expect("serializable"));
            map.insert("input_dim".into(), self.input_dim.into());
        }
        Checkpoint::from_named(self.names.iter().map(String::as_str).zip(&self.params), meta)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let bad = |detail: String| Error::Format { what: "checkpoint", detail };
        let config: ModelConfig = serde_json::from_value(ckpt.meta.get("model").cloned().ok_or_else(|| bad("missing model config".into()))?)
            .map_err(|e| bad(e.to_string()))?;
        let input_dim = ckpt
            .meta
            .get("input_dim")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| bad("missing input_dim".into()))? as usize;
        let mut model = Model::new(config, input_dim, 0)?;
        for i in 0..model.names.len() {
            let t = ckpt.tensor(&model.names[i])?;
            if t.shape() != model.params[i].shape() {
                return Err(bad(format!("parameter `{}` has shape {:?}", model.names[i], t.shape())));
            }
            model.params[i] = t;
        }
        Ok(model)
    }
}
