use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the data-combination table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub combination: String,
    pub auroc: f64,
    pub bacc: f64,
    pub val_auroc: f64,
    pub val_bacc: f64,
    pub n_features: usize,
    pub average_degree: f64,
}

/// Test metrics of one model on one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub model: String,
    pub auroc: f64,
    pub bacc: f64,
}

/// Cross-validation mean and sample standard deviation per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub bacc_mean: f64,
    pub bacc_std: f64,
}

/// A single train/validation/test run of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub val_auroc: f64,
    pub val_bacc: f64,
    pub test_auroc: f64,
    pub test_bacc: f64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        file: path.display().to_string(),
        line,
        column: 1,
        reason: e.to_string(),
    }
}

/// CSV with a leading `# config_hash=` comment row.
pub fn write_table<T: Serialize>(path: &Path, config_hash: &str, rows: &[T]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_table`], skipping comment rows.
pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_keeps_hash_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            FoldRow { fold: 0, model: "LR".into(), auroc: 0.5, bacc: 0.25 },
            FoldRow { fold: 1, model: "MLP".into(), auroc: 0.75, bacc: 1.0 },
        ];
        write_table(&path, "abc", &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# config_hash=abc\nfold,model,auroc,bacc\n"));
        assert_eq!(read_table::<FoldRow>(&path).unwrap(), rows);
    }
}
