use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Sidecar written by every stage next to its artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    /// Hash over `files` (names and bytes, in listed order).
    pub content_hash: String,
    /// Upstream stage name to the content hash consumed.
    pub inputs: BTreeMap<String, String>,
    /// Artifact paths relative to the stage directory, sorted.
    pub files: Vec<String>,
}

/// Every regular file below `dir`, relative and sorted, manifest excluded.
pub fn list_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("below root");
                let rel = rel.to_string_lossy().replace('\\', "/");
                if rel != MANIFEST_FILE {
                    out.push(rel);
                }
            }
        }
        Ok(())
    }
    let mut out = vec![];
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

pub fn content_hash(dir: &Path, files: &[String]) -> Result<String> {
    let mut h = Sha256::new();
    for name in files {
        let bytes = fs::read(dir.join(name))?;
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}

impl Manifest {
    /// Hashes every file currently in `dir` and writes the manifest.
    pub fn seal(
        dir: &Path,
        stage: &str,
        config_hash: &str,
        seed: u64,
        inputs: BTreeMap<String, String>,
    ) -> Result<Manifest> {
        let files = list_files(dir)?;
        let m = Manifest {
            stage: stage.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            content_hash: content_hash(dir, &files)?,
            inputs,
            files,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(manifest_path(dir), text)?;
        Ok(m)
    }

    pub fn load(dir: &Path) -> Result<Option<Manifest>> {
        let path = manifest_path(dir);
        if !path.exists() {
            return Ok(None);
        }
        let m = serde_json::from_slice(&fs::read(&path)?).map_err(|e| Error::Corruption {
            path,
            reason: e.to_string(),
        })?;
        Ok(Some(m))
    }

    /// True when the listed files still hash to `content_hash`.
    pub fn intact(&self, dir: &Path) -> bool {
        matches!(list_files(dir), Ok(files) if files == self.files)
            && matches!(content_hash(dir, &self.files), Ok(h) if h == self.content_hash)
    }
}

/// Loads an upstream manifest and checks it against the current config.
pub fn require_fresh(dir: &Path, stage: &str, expected_hash: &str) -> Result<Manifest> {
    let m = Manifest::load(dir)?
        .ok_or_else(|| Error::stale(stage, format!("no artifact at {}", dir.display())))?;
    if m.config_hash != expected_hash {
        return Err(Error::stale(stage, "configuration changed since it last ran"));
    }
    if !m.intact(dir) {
        return Err(Error::stale(stage, "artifacts were modified after they were written"));
    }
    Ok(m)
}
