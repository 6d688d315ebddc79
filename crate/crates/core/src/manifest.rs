//! Run manifests: what was run, from which configuration, and where the
//! output went.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    /// SHA-256 of the canonical JSON form of the configuration.
    pub config_digest: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
}

/// Module name to version for every module that can contribute output.
pub fn module_versions() -> BTreeMap<String, String> {
    let v = env!("CARGO_PKG_VERSION");
    [
        "pulse",
        "device_model",
        "noise",
        "clifford",
        "experiments",
        "calibration",
        "readout",
        "cli",
    ]
    .iter()
    .map(|m| (m.to_string(), v.to_string()))
    .collect()
}

/// Serialize with object keys in sorted order, whatever the field order of
/// the source type.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps objects in a BTreeMap, so a round trip sorts them
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    let text = canonical_json(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

impl RunManifest {
    pub fn begin<T: Serialize>(experiment: &str, config: &T, seed: u64) -> Result<Self> {
        Ok(RunManifest {
            experiment: experiment.to_string(),
            config_digest: digest(config)?,
            seed,
            versions: module_versions(),
            started: chrono::Utc::now().to_rfc3339(),
            finished: String::new(),
            outputs: Vec::new(),
        })
    }

    pub fn finish(&mut self) {
        self.finished = chrono::Utc::now().to_rfc3339();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
