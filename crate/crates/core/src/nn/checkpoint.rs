use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::Optimizer;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "gamenet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON envelope around any serializable model part.
///
/// Floats are written in shortest round-trip form and parsed with exact
/// rounding, so `load(save(x)) == x` bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub model: T,
    #[serde(default)]
    pub optimizers: Vec<Optimizer>,
}

impl<T: Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn new(seed: u64, model: T) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed,
            model,
            optimizers: Vec::new(),
        }
    }

    pub fn with_optimizers(mut self, optimizers: Vec<Optimizer>) -> Self {
        self.optimizers = optimizers;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(text)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidInput(format!(
                "not a checkpoint (format {:?})",
                ckpt.format
            )));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
