use std::path::{Path, PathBuf};

use diagraph_core::io::{atomic_write, fnv1a};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const RUN_MANIFEST_FILE: &str = "run.json";

/// Provenance record written beside every command's outputs. `args` plus
/// the embedded `config` are enough to rerun the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
    /// RFC 3339, UTC.
    pub timestamp: String,
}

/// FNV-1a over the compact JSON of `config`. serde_json keeps object keys
/// sorted, so equal configs hash equally whatever their source formatting.
pub fn config_hash(config: &serde_json::Value) -> String {
    format!("{:016x}", fnv1a(config.to_string().as_bytes()))
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], config: serde_json::Value, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            args: args.to_vec(),
            config_hash: config_hash(&config),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(RUN_MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        atomic_write(&path, json.as_bytes()).map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
    }
}
