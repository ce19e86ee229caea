//! Layered run configuration: preset defaults, then a JSON config file, then
//! command-line flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Recursively merges `patch` into `base`; objects merge key by key, any
/// other value replaces.
pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if !value.is_object() {
        bail!("config {} must hold a JSON object", path.display());
    }
    Ok(value)
}

/// Flag overrides collected as a JSON object.
#[derive(Default)]
pub struct Patch(Map<String, Value>);

impl Patch {
    pub fn set<T: Serialize>(&mut self, key: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.insert(key.to_string(), serde_json::to_value(v).expect("flag value serialises"));
        }
        self
    }

    pub fn into_value(self) -> Value {
        Value::Object(self.0)
    }
}

/// Preset defaults overlaid with the optional config file and the flags.
pub fn layered<T: Serialize + DeserializeOwned>(defaults: &T, file: Option<&Path>, flags: Patch) -> Result<T> {
    let mut value = serde_json::to_value(defaults)?;
    if let Some(path) = file {
        merge(&mut value, read_config_file(path)?);
    }
    merge(&mut value, flags.into_value());
    serde_json::from_value(value).context("invalid configuration")
}

/// Resolves the seed list: `--seeds N` asks for N consecutive seeds starting
/// at `--seed` (or 0); `--seed` alone shifts the preset's seeds.
pub fn resolve_seeds(preset: &[u64], count: Option<usize>, first: Option<u64>) -> Vec<u64> {
    match (count, first) {
        (Some(n), s) => {
            let s = s.unwrap_or(0);
            (s..s + n as u64).collect()
        }
        (None, Some(s)) => (s..s + preset.len() as u64).collect(),
        (None, None) => preset.to_vec(),
    }
}
