use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::{Deserialize, Serialize};

pub const RUN_MANIFEST_FILE: &str = "run.json";

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// FNV-1a of the container bytes, lowercase hex.
    pub dataset_hash: Option<String>,
    pub out_dir: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub version: String,
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl RunManifest {
    pub(crate) fn begin(command: &str, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            config: BTreeMap::new(),
            seed: None,
            dataset_hash: None,
            out_dir: out_dir.display().to_string(),
            started_unix: unix_now(),
            finished_unix: 0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub(crate) fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub(crate) fn hash_file(&mut self, path: &Path) -> Result<()> {
        self.dataset_hash = Some(format!("{:016x}", fnv1a64(&std::fs::read(path)?)));
        Ok(())
    }

    pub(crate) fn finish(mut self, out_dir: &Path) -> Result<Self> {
        self.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(out_dir.join(RUN_MANIFEST_FILE), text + "\n")?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
