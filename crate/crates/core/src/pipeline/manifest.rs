//! Provenance records written next to every artifact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::NlcgConfig;
use crate::pipeline::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestKind {
    Data,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: ManifestKind,
    pub config: RunConfig,
    /// SHA-256 of the configuration with the output directory removed.
    pub config_hash: String,
    pub coarse_mesh_hash: String,
    pub fine_mesh_hash: String,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub noise: f64,
    pub seed: u64,
    /// Noise stream `i` perturbs field `i`.
    pub noise_streams: usize,
    pub data_file: String,
    pub data_sha256: String,
    /// Reconstruction settings actually used; absent for data manifests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nlcg: Option<NlcgConfig>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.out = None;
    Ok(sha256_hex(serde_json::to_string(&c)?.as_bytes()))
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// The manifest stored beside a data file, if any.
    pub fn beside(data_file: &Path) -> Result<Option<Manifest>> {
        let path = data_file.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE);
        if path.exists() {
            Manifest::read(&path).map(Some)
        } else {
            Ok(None)
        }
    }
}
