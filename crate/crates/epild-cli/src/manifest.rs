//! Run manifests: every command that writes files also writes a
//! `manifest.json` recording the command, the fully resolved configuration,
//! the master seed, the model identity, the tool version, the wall-clock
//! duration, and the list of data files produced. Re-running with the same
//! configuration reproduces every listed data file byte for byte; only the
//! recorded duration varies between runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub model_id: String,
    pub model_hash: String,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    seed: u64,
    model_id: String,
    model_hash: String,
    config: BTreeMap<String, String>,
    outputs: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, model: &epild::JumpModel) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            seed,
            model_id: model.id().to_string(),
            model_hash: format!("{:016x}", model.param_hash()),
            config: BTreeMap::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Write `manifest.json` into `dir` and return its path. Output entries
    /// are recorded relative to the directory.
    pub fn write(self, dir: &Path) -> Result<PathBuf> {
        let outputs = self
            .outputs
            .iter()
            .map(|o| {
                Path::new(o)
                    .strip_prefix(dir)
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|_| o.clone())
            })
            .collect();
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            model_id: self.model_id,
            model_hash: self.model_hash,
            config: self.config,
            outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
