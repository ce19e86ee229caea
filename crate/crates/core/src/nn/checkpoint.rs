use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Parameters;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "condis-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Named parameter arrays with their shapes and the hash of the config that
/// produced them. Stored as JSON; floats round-trip exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub tensors: Vec<NamedTensor>,
}

/// Hex SHA-256 of the JSON serialisation of `config` with object keys
/// sorted, so the hash ignores field order.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_value(config).expect("config serialises");
    let bytes = serde_json::to_vec(&canonical).expect("value serialises");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash.into(),
            tensors: Vec::new(),
        }
    }

    /// Appends every tensor of `params` under `prefix.`.
    pub fn add(&mut self, prefix: &str, params: &impl Parameters) {
        for (name, shape, data) in params.tensors() {
            self.tensors.push(NamedTensor {
                name: format!("{prefix}.{name}"),
                shape,
                data: data.to_vec(),
            });
        }
    }

    /// Copies the tensors stored under `prefix.` into `params`, checking
    /// names and shapes.
    pub fn restore(&self, prefix: &str, params: &mut impl Parameters) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = params
            .tensors()
            .into_iter()
            .map(|(n, s, _)| (format!("{prefix}.{n}"), s))
            .collect();
        let mut sources = Vec::with_capacity(expected.len());
        for (name, shape) in &expected {
            let t = self
                .tensors
                .iter()
                .find(|t| &t.name == name)
                .ok_or_else(|| Error::SchemaMismatch(format!("checkpoint lacks tensor `{name}`")))?;
            if &t.shape != shape {
                return Err(Error::SchemaMismatch(format!(
                    "tensor `{name}` has shape {:?}, expected {shape:?}",
                    t.shape
                )));
            }
            sources.push(&t.data);
        }
        for (dst, src) in params.slices_mut().into_iter().zip(sources) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "unsupported checkpoint {} v{}",
                c.format, c.version
            )));
        }
        for t in &c.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::SchemaMismatch(format!("tensor `{}` size disagrees with shape", t.name)));
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
