use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuro::Aggregator;

pub const LAYER_GRID: [usize; 3] = [2, 3, 4];
pub const HIDDEN_GRID: [usize; 3] = [32, 64, 128];
pub const LR_GRID: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];
pub const MAX_EPOCHS: usize = 150;
pub const PATIENCE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SageConfig {
    pub n_layers: usize,
    pub hidden: usize,
    pub aggregator: Aggregator,
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_epochs() -> usize {
    MAX_EPOCHS
}

fn default_patience() -> usize {
    PATIENCE
}

fn check_schedule(max_epochs: usize, patience: usize, lr: f64) -> Result<()> {
    if !(1..=MAX_EPOCHS).contains(&max_epochs) {
        return Err(Error::config("max_epochs", format!("{max_epochs} is outside 1..={MAX_EPOCHS}")));
    }
    if patience == 0 {
        return Err(Error::config("patience", "must be at least 1"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::config("learning_rate", format!("{lr} must be positive")));
    }
    Ok(())
}

impl SageConfig {
    pub fn new(n_layers: usize, hidden: usize, aggregator: Aggregator, learning_rate: f64) -> Self {
        SageConfig {
            n_layers,
            hidden,
            aggregator,
            learning_rate,
            max_epochs: MAX_EPOCHS,
            patience: PATIENCE,
            seed: 0,
        }
    }

    /// Layers, width and learning rate must come from the search grid.
    pub fn validate(&self) -> Result<()> {
        if !LAYER_GRID.contains(&self.n_layers) {
            return Err(Error::config("n_layers", format!("{} not in {LAYER_GRID:?}", self.n_layers)));
        }
        if !HIDDEN_GRID.contains(&self.hidden) {
            return Err(Error::config("hidden", format!("{} not in {HIDDEN_GRID:?}", self.hidden)));
        }
        if !LR_GRID.contains(&self.learning_rate) {
            return Err(Error::config(
                "learning_rate",
                format!("{} not in {LR_GRID:?}", self.learning_rate),
            ));
        }
        check_schedule(self.max_epochs, self.patience, self.learning_rate)
    }

    /// The full 108-point grid, learning rate outermost.
    pub fn grid(max_epochs: usize, patience: usize, seed: u64) -> Vec<SageConfig> {
        let mut out = Vec::with_capacity(108);
        for lr in LR_GRID {
            for layers in LAYER_GRID {
                for hidden in HIDDEN_GRID {
                    for aggregator in Aggregator::ALL {
                        out.push(SageConfig {
                            n_layers: layers,
                            hidden,
                            aggregator,
                            learning_rate: lr,
                            max_epochs,
                            patience,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Fully connected baseline; no hidden layers is logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseConfig {
    pub hidden_layers: Vec<usize>,
    pub learning_rate: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DenseConfig {
    pub fn logreg(learning_rate: f64) -> Self {
        DenseConfig {
            hidden_layers: vec![],
            learning_rate,
            max_epochs: MAX_EPOCHS,
            patience: PATIENCE,
            seed: 0,
        }
    }

    pub fn mlp(learning_rate: f64) -> Self {
        DenseConfig {
            hidden_layers: vec![64, 64],
            ..Self::logreg(learning_rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::config("hidden_layers", "layer widths must be positive"));
        }
        check_schedule(self.max_epochs, self.patience, self.learning_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_108_distinct_valid_points() {
        let g = SageConfig::grid(150, 10, 1);
        assert_eq!(g.len(), 108);
        assert!(g.iter().all(|c| c.validate().is_ok()));
        for (i, a) in g.iter().enumerate() {
            assert!(g[i + 1..].iter().all(|b| a != b));
        }
    }

    #[test]
    fn off_grid_values_rejected() {
        let mut c = SageConfig::new(2, 48, Aggregator::Mean, 1e-3);
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "hidden"));
        c.hidden = 64;
        c.learning_rate = 2e-3;
        assert!(c.validate().is_err());
        c.learning_rate = 1e-5;
        c.max_epochs = 151;
        assert!(c.validate().is_err());
    }
}
