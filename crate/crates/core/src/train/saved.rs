//! Checkpoints bundled with the configuration needed to rebuild the models.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Models, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

pub const SAVED_MODEL_FORMAT: &str = "condis-model";
pub const SAVED_MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub input_dim: usize,
    pub cardinalities: Vec<usize>,
    pub checkpoint: Checkpoint,
}

impl SavedModel {
    pub fn new(models: &Models, config: &TrainConfig) -> Self {
        SavedModel {
            format: SAVED_MODEL_FORMAT.into(),
            version: SAVED_MODEL_VERSION,
            config: config.clone(),
            input_dim: models.encoder.spec.input_dim,
            cardinalities: models.cardinalities.clone(),
            checkpoint: models.checkpoint(&config.hash()),
        }
    }

    /// Rebuilds the models, checking that the checkpoint belongs to the
    /// stored configuration.
    pub fn to_models(&self) -> Result<Models> {
        if self.checkpoint.config_hash != self.config.hash() {
            return Err(Error::SchemaMismatch(
                "checkpoint was produced by a different configuration".into(),
            ));
        }
        let mut models = Models::init(&self.config, self.input_dim, &self.cardinalities, &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| Error::SchemaMismatch(format!("cannot rebuild models: {e}")))?;
        models.restore(&self.checkpoint)?;
        Ok(models)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a saved model; anything that is not a compatible saved model
    /// is a [`Error::SchemaMismatch`].
    pub fn from_json(text: &str) -> Result<Self> {
        let head: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(format!("not JSON: {e}")))?;
        let format = head.get("format").and_then(|v| v.as_str()).unwrap_or("");
        let version = head.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if format != SAVED_MODEL_FORMAT || version != SAVED_MODEL_VERSION as u64 {
            return Err(Error::SchemaMismatch(format!(
                "expected {SAVED_MODEL_FORMAT} v{SAVED_MODEL_VERSION}, found `{format}` v{version}"
            )));
        }
        let saved: SavedModel =
            serde_json::from_value(head).map_err(|e| Error::SchemaMismatch(format!("malformed saved model: {e}")))?;
        // Re-validate the embedded checkpoint.
        Checkpoint::from_json(&saved.checkpoint.to_json()?)?;
        Ok(saved)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::MissingData(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
