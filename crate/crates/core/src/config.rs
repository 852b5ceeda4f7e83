//! Run configuration: one JSON object, optionally overridden by
//! `PEPLINK_<KEY>` environment variables and then by explicit overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::augment::PerturbScope;
use crate::error::{Error, Result};
use crate::model::{Activation, ModelConfig, TrainConfig};
use crate::similarity::{AlignmentParams, BandwidthMode};
use crate::tensor::AdamConfig;

pub const ENV_PREFIX: &str = "PEPLINK_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Directory holding `peptides.tsv`, `microbes.tsv`, `diseases.tsv` and
    /// `associations.tsv`.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,

    pub alignment: AlignmentParams,
    pub redundancy_threshold: f64,
    pub gip_bandwidth_mode: BandwidthMode,
    pub gamma_prime: f64,

    pub tau: f64,
    pub drop_rate: f64,
    pub perturb_scope: PerturbScope,

    pub embed_dim: usize,
    pub gcn_layers: usize,
    pub attn_heads: usize,
    pub mlp_hidden: usize,
    pub gcn_activation: Activation,
    pub use_gcn: bool,
    pub use_transformer: bool,
    pub contrastive: bool,

    pub lambda: f64,
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub target_fraction: f64,

    pub k: usize,
    pub ratio: f64,
    pub repetitions: usize,
    pub threshold: f64,
    pub top_n: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        Self {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            alignment: AlignmentParams::default(),
            redundancy_threshold: 0.7,
            gip_bandwidth_mode: BandwidthMode::default(),
            gamma_prime: 1.0,
            tau: 0.4,
            drop_rate: 0.2,
            perturb_scope: PerturbScope::All,
            embed_dim: model.embed_dim,
            gcn_layers: model.gcn_layers,
            attn_heads: model.attn_heads,
            mlp_hidden: model.mlp_hidden,
            gcn_activation: model.gcn_activation,
            use_gcn: model.use_gcn,
            use_transformer: model.use_transformer,
            contrastive: true,
            lambda: 1.0,
            optimizer: AdamConfig::default(),
            epochs: 300,
            target_fraction: 0.5,
            k: 5,
            ratio: 1.0,
            repetitions: 1,
            threshold: 0.5,
            top_n: 10,
        }
    }
}

fn unit_interval(name: &str, v: f64, open_top: bool) -> Result<()> {
    let ok = v >= 0.0 && if open_top { v < 1.0 } else { v <= 1.0 };
    if ok {
        Ok(())
    } else {
        let top = if open_top { ")" } else { "]" };
        Err(Error::Config(format!("{name} = {v} outside [0, 1{top}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.alignment.validate()?;
        self.optimizer.validate()?;
        self.model_config().validate()?;
        unit_interval("redundancy_threshold", self.redundancy_threshold, false)?;
        unit_interval("tau", self.tau, false)?;
        unit_interval("drop_rate", self.drop_rate, true)?;
        unit_interval("threshold", self.threshold, false)?;
        if !(self.gamma_prime > 0.0 && self.gamma_prime.is_finite()) {
            return Err(Error::Config(format!("gamma_prime = {} must be positive", self.gamma_prime)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda = {} must be non-negative", self.lambda)));
        }
        if !self.contrastive && self.lambda == 0.0 {
            return Err(Error::Config("contrastive = false with lambda = 0 leaves no objective".into()));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::Config(format!("target_fraction = {} outside (0, 1]", self.target_fraction)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k = {} must be at least 2", self.k)));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::Config(format!("ratio = {} must be positive", self.ratio)));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be positive".into()));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            gcn_layers: self.gcn_layers,
            attn_heads: self.attn_heads,
            mlp_hidden: self.mlp_hidden,
            gcn_activation: self.gcn_activation,
            use_gcn: self.use_gcn,
            use_transformer: self.use_transformer,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            adam: self.optimizer,
            lambda: self.lambda,
            contrastive: self.contrastive,
            drop_rate: self.drop_rate,
            perturb_scope: self.perturb_scope,
            target_fraction: self.target_fraction,
            seed,
        }
    }

    /// Merges, in increasing precedence: defaults, the JSON file, `env`
    /// pairs named `PEPLINK_<KEY>`, then `overrides`. Validates the result.
    pub fn resolve(file: Option<&Path>, env: impl IntoIterator<Item = (String, String)>, overrides: Map<String, Value>) -> Result<Self> {
        let mut merged = match serde_json::to_value(RunConfig::default()).expect("serializable") {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let Value::Object(obj) = value else {
                return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
            };
            merge(&mut merged, obj);
        }
        let mut from_env = Map::new();
        for (name, raw) in env {
            let Some(key) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if !merged.contains_key(&key) {
                continue;
            }
            // Numbers, booleans and objects parse as JSON; anything else is a string.
            let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            from_env.insert(key, value);
        }
        merge(&mut merged, from_env);
        merge(&mut merged, overrides);
        let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Object values merge key-wise so a partial `optimizer` block keeps the
/// remaining defaults.
fn merge(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
