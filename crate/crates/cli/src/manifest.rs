//! Run manifests: one `manifest.json` per output directory, written whether
//! the command succeeded or not.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    /// Absent for directories and unreadable paths.
    pub sha256: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ConfigRecord {
    pub name: String,
    /// The file given on the command line, or none for built-in defaults.
    pub path: Option<PathBuf>,
    /// Hash of the effective configuration serialized as compact JSON.
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: Vec<InputRecord>,
    pub configs: Vec<ConfigRecord>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub outputs: Vec<PathBuf>,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Bookkeeping for one command invocation.
pub struct Run {
    command: String,
    started_at: DateTime<Utc>,
    out_dir: Option<PathBuf>,
    inputs: Vec<InputRecord>,
    configs: Vec<ConfigRecord>,
    outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

impl Run {
    pub fn new(command: &str, out_dir: Option<&Path>) -> Self {
        Run {
            command: command.to_string(),
            started_at: Utc::now(),
            out_dir: out_dir.map(Path::to_path_buf),
            inputs: Vec::new(),
            configs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        let sha256 = if path.is_file() { fs::read(path).ok().map(|b| sha256_hex(&b)) } else { None };
        self.inputs.push(InputRecord { path: path.to_path_buf(), sha256 });
    }

    pub fn config(&mut self, name: &str, path: Option<&Path>, effective: &impl Serialize) {
        let json = serde_json::to_vec(effective).expect("configs serialize");
        self.configs.push(ConfigRecord { name: name.to_string(), path: path.map(Path::to_path_buf), sha256: sha256_hex(&json) });
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = self.out_dir.as_deref().expect("commands with outputs take --out");
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn record_outputs(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        self.outputs.extend(paths);
    }

    /// Writes the manifest if the command has an output directory.
    pub fn finish(self, exit_code: u8, error: Option<String>) -> Option<PathBuf> {
        let dir = self.out_dir.clone()?;
        if fs::create_dir_all(&dir).is_err() {
            return None;
        }
        let manifest = RunManifest {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            configs: self.configs,
            started_at: self.started_at,
            finished_at: Utc::now(),
            outputs: self.outputs,
            exit_code,
            error,
            notes: self.notes,
        };
        let path = dir.join(MANIFEST_FILE);
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        fs::write(&path, json).ok()?;
        Some(path)
    }
}
