//! Run directories: `out/<preset>/<timestamp>-<confighash>/` with a manifest
//! written before any work starts and updated when the run ends.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{SecondsFormat, Utc};
use condis::nn::checkpoint::config_hash;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST_SCHEMA: &str = "condis-manifest/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub subcommand: String,
    pub preset: String,
    pub config: Value,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub code_version: String,
    pub data_fingerprints: BTreeMap<String, String>,
    pub started: String,
    pub finished: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub outputs: Vec<String>,
}

pub struct RunDir {
    pub path: PathBuf,
    pub manifest: RunManifest,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunDir {
    /// Creates the directory, writes `config.json` and a `running`
    /// manifest. `explicit` replaces the generated location.
    pub fn create(
        out_dir: &Path,
        explicit: Option<&Path>,
        subcommand: &str,
        preset: &str,
        config: &impl Serialize,
        seeds: &[u64],
        data_fingerprints: BTreeMap<String, String>,
    ) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let hash = config_hash(&config);
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let stamp = Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
                let base = out_dir.join(preset).join(format!("{stamp}-{}", &hash[..12]));
                let mut path = base.clone();
                let mut n = 1;
                while path.exists() {
                    path = PathBuf::from(format!("{}-{n}", base.display()));
                    n += 1;
                }
                path
            }
        };
        fs::create_dir_all(&path).with_context(|| format!("creating run directory {}", path.display()))?;
        let mut run = RunDir {
            path,
            manifest: RunManifest {
                schema: MANIFEST_SCHEMA.into(),
                subcommand: subcommand.into(),
                preset: preset.into(),
                config: config.clone(),
                config_hash: hash,
                seeds: seeds.to_vec(),
                code_version: env!("CONDIS_GIT_HASH").into(),
                data_fingerprints,
                started: now(),
                finished: None,
                status: RunStatus::Running,
                error: None,
                outputs: Vec::new(),
            },
        };
        run.write("config.json", serde_json::to_string_pretty(&config)? + "\n")?;
        run.save_manifest()?;
        run.event("started", serde_json::json!({"config_hash": run.manifest.config_hash}))?;
        Ok(run)
    }

    fn save_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(self.path.join("manifest.json"), text).context("writing manifest")?;
        Ok(())
    }

    /// Writes `name` (relative, parents created) and records it as an output.
    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.path.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        Ok(path)
    }

    /// Appends one event line to `log.ndjson`.
    pub fn event(&mut self, event: &str, fields: Value) -> Result<()> {
        let mut line = serde_json::json!({"time": now(), "event": event});
        if let (Value::Object(l), Value::Object(f)) = (&mut line, fields) {
            l.extend(f);
        }
        let path = self.path.join("log.ndjson");
        let mut file = fs::OpenOptions::new().create(true).append(true).open(&path)?;
        writeln!(file, "{line}")?;
        if !self.manifest.outputs.iter().any(|o| o == "log.ndjson") {
            self.manifest.outputs.push("log.ndjson".into());
        }
        Ok(())
    }

    /// Records the outcome in the manifest and passes the result through.
    pub fn finish<T>(mut self, result: Result<T>) -> Result<T> {
        self.manifest.finished = Some(now());
        match &result {
            Ok(_) => {
                self.manifest.status = RunStatus::Completed;
                self.event("completed", Value::Object(Default::default()))?;
            }
            Err(e) => {
                self.manifest.status = RunStatus::Failed;
                self.manifest.error = Some(format!("{e:#}"));
                self.event("failed", serde_json::json!({"error": format!("{e:#}")}))?;
            }
        }
        self.save_manifest()?;
        log::info!("run directory {}", self.path.display());
        result
    }
}
