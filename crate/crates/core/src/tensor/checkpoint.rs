//! JSON checkpoint: `{"format": ..., "meta": ..., "params": {name: {shape, data}}}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dense::Tensor;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "peplink-checkpoint/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    #[serde(default)]
    pub meta: serde_json::Value,
    pub params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn from_named<'a>(named: impl IntoIterator<Item = (&'a str, &'a Tensor)>, meta: serde_json::Value) -> Self {
        let params = named
            .into_iter()
            .map(|(name, t)| {
                (
                    name.to_string(),
                    StoredTensor {
                        shape: t.shape().to_vec(),
                        data: t.data().to_vec(),
                    },
                )
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            meta,
            params,
        }
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        let stored = self.params.get(name).ok_or_else(|| Error::Format {
            what: "checkpoint",
            detail: format!("missing parameter `{name}`"),
        })?;
        Tensor::new(stored.shape.clone(), stored.data.clone()).map_err(|e| Error::Format {
            what: "checkpoint",
            detail: format!("parameter `{name}`: {e}"),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| Error::Format {
            what: "checkpoint",
            detail: format!("{}: {e}", path.display()),
        })?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Format {
                what: "checkpoint",
                detail: format!("format tag `{}`, expected `{CHECKPOINT_FORMAT}`", ckpt.format),
            });
        }
        Ok(ckpt)
    }
}
