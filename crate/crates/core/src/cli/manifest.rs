use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::Workspace;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    /// Workspace-relative path.
    pub path: String,
    pub sha256: String,
}

/// Deterministic record of one subcommand run. Wall time lives in a
/// sidecar so that identical runs produce identical manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub summary: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub subcommand: String,
    pub wall_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Hashes each workspace-relative path. A directory hashes every file
/// beneath it, sorted by path.
pub fn hash_paths(ws: &Workspace, rels: &[String]) -> Result<Vec<FileHash>> {
    let mut out = Vec::new();
    for rel in rels {
        let full = ws.path(rel);
        if full.is_dir() {
            let mut entries: Vec<String> = fs::read_dir(&full)
                .map_err(|e| Error::io(&full, e))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .map(|e| format!("{rel}/{}", e.file_name().to_string_lossy()))
                .collect();
            entries.sort();
            for child in entries {
                let sha256 = sha256_file(&ws.path(&child))?;
                out.push(FileHash { path: child, sha256 });
            }
        } else {
            out.push(FileHash {
                path: rel.clone(),
                sha256: sha256_file(&full)?,
            });
        }
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}
