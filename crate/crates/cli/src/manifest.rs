use std::path::Path;

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commands::Resolved;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Everything needed to rerun a command, and what it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub library_version: String,
    pub cli_version: String,
    pub config: Resolved,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputDigest>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output files of one run, written as they are produced.
pub struct Outputs<'a> {
    dir: &'a Path,
    pub digests: Vec<OutputDigest>,
}

impl<'a> Outputs<'a> {
    pub fn new(dir: &'a Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir, digests: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.digests.push(OutputDigest { file: name.to_string(), bytes: bytes.len(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn finish(self, config: Resolved, started_at: String) -> anyhow::Result<RunManifest> {
        let manifest = RunManifest {
            command: config.command_name().to_string(),
            library_version: lifetime_poverty::VERSION.to_string(),
            cli_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed(),
            config,
            started_at,
            finished_at: now(),
            outputs: self.digests,
        };
        let path = self.dir.join(FILE_NAME);
        std::fs::write(&path, lifetime_poverty::export::to_json(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
