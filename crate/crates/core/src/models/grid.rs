use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SageConfig;
use super::train::train_sage;
use crate::error::Result;
use crate::evalstat::Splits;
use crate::matrix::Matrix;
use crate::neuro::Aggregator;
use crate::par;
use crate::simgraph::SimilarityGraph;

/// One trained grid point, in the column order of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub lr: f64,
    pub layers: usize,
    pub hidden: usize,
    pub aggregator: Aggregator,
    pub stopped_epoch: usize,
    pub val_auroc: f64,
    pub val_bacc: f64,
    pub test_auroc: f64,
    pub test_bacc: f64,
    pub seed: u64,
}

/// Trains every configuration and ranks by validation AUROC, best first;
/// equal scores keep grid order.
pub fn grid_search(
    grid: &[SageConfig],
    graph: &SimilarityGraph,
    features: &Matrix,
    labels: &[bool],
    splits: &Splits,
) -> Result<Vec<GridRow>> {
    let runs = par::map_slice(grid, |c| -> Result<GridRow> {
        let (_, r) = train_sage(c, graph, features, labels, splits)?;
        log::info!(
            "grid lr={} layers={} hidden={} agg={} -> val_auroc {:.4}",
            c.learning_rate,
            c.n_layers,
            c.hidden,
            c.aggregator,
            r.val.auroc
        );
        Ok(GridRow {
            lr: c.learning_rate,
            layers: c.n_layers,
            hidden: c.hidden,
            aggregator: c.aggregator,
            stopped_epoch: r.stopped_epoch,
            val_auroc: r.val.auroc,
            val_bacc: r.val.bacc,
            test_auroc: r.test.auroc,
            test_bacc: r.test.bacc,
            seed: c.seed,
        })
    });
    let mut rows = runs.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.val_auroc.total_cmp(&a.val_auroc));
    Ok(rows)
}

impl GridRow {
    pub fn config(&self, max_epochs: usize, patience: usize) -> SageConfig {
        SageConfig {
            n_layers: self.layers,
            hidden: self.hidden,
            aggregator: self.aggregator,
            learning_rate: self.lr,
            max_epochs,
            patience,
            seed: self.seed,
        }
    }
}

/// CSV with a leading `# config_hash=` comment line.
pub fn write_grid_csv(rows: &[GridRow], path: &Path, config_hash: &str) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
