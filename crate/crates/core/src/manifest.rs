//! Experiment manifests and their content hashes.
//!
//! The hash is SHA-256 over compact JSON with object keys sorted, so it does not depend on
//! the key order of the input file. Worker count is deliberately not part of the manifest:
//! every reduction is ordered, so results do not depend on it.

use crate::config::ExperimentConfig;
use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub artifact_version: String,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl ExperimentManifest {
    pub fn new(command: &str, seed: u64, config: ExperimentConfig) -> Self {
        ExperimentManifest {
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
        }
    }

    pub fn hash(&self) -> Result<String> {
        content_hash(self)
    }
}

/// Compact JSON with sorted keys.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Map is ordered by key unless `preserve_order` is enabled
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let digest = Sha256::digest(canonical_json(value)?.as_bytes());
    Ok(hex::encode(digest))
}

/// CSV writer whose output starts with `# `-prefixed comment lines.
pub fn commented_csv<W: std::io::Write>(mut out: W, comments: &[String]) -> Result<csv::Writer<W>> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(out))
}

/// Hash of the family section alone, used to key caches and snapshots.
pub fn family_hash(config: &ExperimentConfig) -> Result<String> {
    content_hash(&config.family)
}
