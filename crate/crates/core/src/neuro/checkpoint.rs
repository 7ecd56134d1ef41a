//! Model checkpoints: `checkpoint.json` describes the model and lists the
//! parameters; `params.bin` holds one `CGEMB1` record per parameter in the
//! same order. Values are stored as f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MANIFEST_FILE: &str = "checkpoint.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u8,
    /// Architecture, seed and hyperparameters, as chosen by the caller.
    pub model: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

pub fn save_checkpoint<M: Serialize>(dir: &Path, model: &M, store: &ParamStore) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = CheckpointManifest {
        version: CHECKPOINT_VERSION,
        model: serde_json::to_value(model)?,
        params: store
            .iter()
            .map(|p| ParamEntry {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
            })
            .collect(),
    };
    std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    let mut w = BufWriter::new(File::create(dir.join(PARAMS_FILE))?);
    for p in store.iter() {
        p.value.write_binary(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint, checking every record against the manifest.
pub fn load_checkpoint(dir: &Path) -> Result<(CheckpointManifest, Vec<Matrix>)> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: CheckpointManifest =
        serde_json::from_slice(&std::fs::read(&manifest_path)?).map_err(|e| Error::Corruption {
            path: manifest_path.clone(),
            reason: e.to_string(),
        })?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(manifest.version));
    }
    let params_path = dir.join(PARAMS_FILE);
    let mut r = BufReader::new(File::open(&params_path)?);
    let mut values = Vec::with_capacity(manifest.params.len());
    for entry in &manifest.params {
        let m = Matrix::read_binary(&mut r, &params_path)?;
        if m.shape() != (entry.rows, entry.cols) {
            return Err(Error::Corruption {
                path: params_path,
                reason: format!(
                    "parameter `{}` is {:?}, manifest says {}x{}",
                    entry.name,
                    m.shape(),
                    entry.rows,
                    entry.cols
                ),
            });
        }
        values.push(m);
    }
    Ok((manifest, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_within_f32() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        store.add_glorot("w", 5, 3, &mut rng);
        store.add_zeros("b", 1, 3);
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &serde_json::json!({"kind": "test"}), &store).unwrap();
        let (manifest, values) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(manifest.model["kind"], "test");
        assert_eq!(manifest.params[1].name, "b");
        for (p, v) in store.iter().zip(&values) {
            assert!(p.value.max_abs_diff(v) < 1e-7);
        }
        let mut restored = store.clone();
        restored.load_values(&values).unwrap();
    }

    #[test]
    fn truncated_blob_is_corruption() {
        let mut store = ParamStore::new();
        store.add_zeros("w", 4, 4);
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &(), &store).unwrap();
        let path = dir.path().join(PARAMS_FILE);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Corruption { .. })));
    }
}
