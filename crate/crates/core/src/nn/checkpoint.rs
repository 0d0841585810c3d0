use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ArchSpec, CnnModel};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::preprocess::PreprocessRecipe;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild a model and reproduce its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub arch: ArchSpec,
    pub theta: Vec<f64>,
    pub anchor: Vec<f64>,
    pub frozen: Vec<bool>,
    pub train_config: TrainConfig,
    pub preprocess: PreprocessRecipe,
    /// Mean training-set embedding, for domain-shift checks.
    pub embedding_mean: Vec<f64>,
}

impl Checkpoint {
    pub fn new(model: &CnnModel, train_config: TrainConfig, preprocess: PreprocessRecipe, embedding_mean: Vec<f64>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            arch: model.arch().clone(),
            theta: model.theta.clone(),
            anchor: model.anchor.clone(),
            frozen: model.frozen.clone(),
            train_config,
            preprocess,
            embedding_mean,
        }
    }

    pub fn model(&self) -> Result<CnnModel> {
        let m = CnnModel::from_parts(self.arch.clone(), self.theta.clone(), self.anchor.clone(), self.frozen.clone())?;
        if !self.embedding_mean.is_empty() && self.embedding_mean.len() != self.arch.hidden {
            return Err(Error::IncompatibleCheckpoint(format!(
                "embedding mean has {} entries, architecture embeds {}",
                self.embedding_mean.len(),
                self.arch.hidden
            )));
        }
        if (self.preprocess.width, self.preprocess.height) != (self.arch.input_width, self.arch.input_height) {
            return Err(Error::IncompatibleCheckpoint(format!(
                "preprocessing emits {}x{}, model expects {}x{}",
                self.preprocess.width, self.preprocess.height, self.arch.input_width, self.arch.input_height
            )));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::IncompatibleCheckpoint(format!(
                "checkpoint version {} (supported: {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.model()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
