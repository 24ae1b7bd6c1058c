use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sota_core::dist::TimeGrid;

pub const MANIFEST_SCHEMA: &str = "sota-manifest/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {} for hashing", path.display()))?;
        Ok(FileHash {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Everything needed to rerun a command and check its outputs byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub args: Vec<String>,
    pub grid: Option<TimeGrid>,
    pub mode: Option<String>,
    pub seeds: Vec<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            schema: MANIFEST_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            grid: None,
            mode: None,
            seeds: Vec::new(),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_inputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            self.inputs.push(FileHash::of(p)?);
        }
        Ok(())
    }

    pub fn add_outputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            self.outputs.push(FileHash::of(p)?);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
