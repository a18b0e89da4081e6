//! Run manifest: one per output directory, written after every other output
//! so its presence marks a completed run.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// Fully resolved flag values.
    pub config: serde_json::Value,
    /// SHA-256 of every input file the run read, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            schema_version: 1,
            command: command.to_string(),
            config,
            input_hashes: BTreeMap::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }

    /// Records the hash of an input file (call for every file the run reads).
    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading input {} for hashing", path.display()))?;
        self.input_hashes.insert(
            path.display().to_string(),
            format!("{:x}", Sha256::digest(&bytes)),
        );
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}
