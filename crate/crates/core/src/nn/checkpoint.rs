use super::layers::ParamSet;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "terasat-params/v1";

/// Named tensors of one or more networks, tagged with a format version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub step: usize,
    pub policy: String,
    pub networks: BTreeMap<String, ParamSet>,
}

impl Checkpoint {
    pub fn new(policy: &str, step: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            step,
            policy: policy.to_string(),
            networks: BTreeMap::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Input(format!("cannot read checkpoint {}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_slice(&bytes)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Input(format!("unsupported checkpoint format {:?}", ck.format)));
        }
        for (name, ps) in &ck.networks {
            if ps.names.len() != ps.values.len()
                || ps.values.iter().any(|m| m.data.len() != m.rows * m.cols)
            {
                return Err(Error::Input(format!("network {name}: malformed tensors")));
            }
        }
        Ok(ck)
    }

    pub fn network(&self, name: &str) -> Result<&ParamSet> {
        self.networks
            .get(name)
            .ok_or_else(|| Error::Input(format!("checkpoint has no network {name:?}")))
    }
}
