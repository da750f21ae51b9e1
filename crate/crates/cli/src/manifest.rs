use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce one run's result payload.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: u64,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub wall_clock_seconds: f64,
    pub result_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digests of a file, or of every `*.json` file of a directory in name order.
pub fn digest_inputs(path: &Path) -> Result<Vec<InputDigest>> {
    let files: Vec<PathBuf> =
        if path.is_dir() { netlocal::io::community_files(path)? } else { vec![path.to_path_buf()] };
    files
        .into_iter()
        .map(|f| {
            let bytes = fs::read(&f).with_context(|| format!("reading {}", f.display()))?;
            Ok(InputDigest { path: f.display().to_string(), sha256: sha256_hex(&bytes) })
        })
        .collect()
}

/// Where the manifest goes when only the result path is known.
pub fn default_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}
