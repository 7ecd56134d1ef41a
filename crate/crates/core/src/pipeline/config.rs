use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::datagen::GenConfig;
use crate::error::{Error, Result};
use crate::evalstat::{SplitSpec, DEFAULT_FRACTIONS};
use crate::featurize::{Selection, DEFAULT_DIM};
use crate::hashing::sha256_hex;
use crate::models::{DenseConfig, SageConfig, HIDDEN_GRID, LAYER_GRID, LR_GRID};
use crate::neuro::Aggregator;

use super::Stage;

/// Thresholds accepted without an explicit override.
pub const TAU_CHOICES: [f64; 4] = [0.8, 0.9, 0.95, 0.99];

/// Everything a pipeline run depends on. Model, split and generator seeds
/// all derive from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Raw tables. Relative paths resolve against the config file.
    pub data_dir: PathBuf,
    pub artifact_dir: PathBuf,
    pub k_folds: usize,
    pub generate: GenConfig,
    pub features: FeatureConfig,
    pub split: SplitConfig,
    pub graph: GraphConfig,
    pub sage: SageConfig,
    pub baselines: BaselineConfig,
    pub grid: GridConfig,
    pub crossval: CrossvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub selection: Selection,
    /// Width of the text embedding blocks.
    pub embed_dim: usize,
    /// Directory of precomputed `<block>.emb` / `<block>.ids` pairs that
    /// replace the built-in encoder for the blocks they cover.
    pub precomputed_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub tau: f64,
    /// Any threshold in (0, 1]; takes precedence over `tau`.
    pub tau_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub mlp_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub learning_rates: Vec<f64>,
    pub layers: Vec<usize>,
    pub hidden: Vec<usize>,
    pub aggregators: Vec<Aggregator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalConfig {
    /// Paired t-test across folds; false selects Welch.
    pub paired: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data_dir: PathBuf::from("data"),
            artifact_dir: PathBuf::from("artifacts"),
            k_folds: 20,
            generate: GenConfig::default(),
            features: FeatureConfig::default(),
            split: SplitConfig::default(),
            graph: GraphConfig::default(),
            sage: SageConfig::new(2, 64, Aggregator::Mean, 1e-3),
            baselines: BaselineConfig::default(),
            grid: GridConfig::default(),
            crossval: CrossvalConfig::default(),
        }
    }
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            selection: Selection::all(),
            embed_dim: DEFAULT_DIM,
            precomputed_dir: None,
        }
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            tau: 0.9,
            tau_override: None,
        }
    }
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            mlp_hidden: DenseConfig::mlp(1e-3).hidden_layers,
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            learning_rates: LR_GRID.to_vec(),
            layers: LAYER_GRID.to_vec(),
            hidden: HIDDEN_GRID.to_vec(),
            aggregators: Aggregator::ALL.to_vec(),
        }
    }
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig { paired: true }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))
    }

    /// Parses a config file; relative directories resolve against its
    /// parent directory.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data_dir = base.join(&cfg.data_dir);
        cfg.artifact_dir = base.join(&cfg.artifact_dir);
        if let Some(dir) = &cfg.features.precomputed_dir {
            cfg.features.precomputed_dir = Some(base.join(dir));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        if self.generate.seed != 0 && self.generate.seed != self.seed {
            return Err(Error::config("generate.seed", "set the top-level `seed` instead"));
        }
        if self.sage.seed != 0 && self.sage.seed != self.seed {
            return Err(Error::config("sage.seed", "set the top-level `seed` instead"));
        }
        self.gen_config().validate()?;
        self.sage_config().validate()?;
        self.dense_config(&self.baselines.mlp_hidden).validate()?;
        if self.features.embed_dim == 0 {
            return Err(Error::config("features.embed_dim", "must be positive"));
        }
        let f = self.split.fractions;
        if f.iter().any(|&v| !(v > 0.0)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split.fractions", "must be positive and sum to 1"));
        }
        match self.graph.tau_override {
            Some(t) if !(t > 0.0 && t <= 1.0) => {
                return Err(Error::config("graph.tau_override", format!("{t} is outside (0, 1]")))
            }
            Some(_) => {}
            None if !TAU_CHOICES.contains(&self.graph.tau) => {
                return Err(Error::config(
                    "graph.tau",
                    format!("{} not in {TAU_CHOICES:?}; use tau_override for other values", self.graph.tau),
                ))
            }
            None => {}
        }
        if self.k_folds < 3 {
            return Err(Error::config("k_folds", "need at least 3 folds"));
        }
        let g = &self.grid;
        if g.learning_rates.is_empty() || g.layers.is_empty() || g.hidden.is_empty() || g.aggregators.is_empty() {
            return Err(Error::config("grid", "every grid axis needs at least one value"));
        }
        for c in self.grid_configs() {
            c.validate()?;
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.graph.tau_override.unwrap_or(self.graph.tau)
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            seed: self.seed,
            ..self.generate.clone()
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            fractions: self.split.fractions,
            seed: self.seed,
        }
    }

    pub fn sage_config(&self) -> SageConfig {
        SageConfig {
            seed: self.seed,
            ..self.sage.clone()
        }
    }

    /// Dense baseline with the GraphSAGE schedule.
    pub fn dense_config(&self, hidden_layers: &[usize]) -> DenseConfig {
        DenseConfig {
            hidden_layers: hidden_layers.to_vec(),
            learning_rate: self.sage.learning_rate,
            max_epochs: self.sage.max_epochs,
            patience: self.sage.patience,
            seed: self.seed,
        }
    }

    /// Grid points, learning rate outermost.
    pub fn grid_configs(&self) -> Vec<SageConfig> {
        let mut out = vec![];
        for &lr in &self.grid.learning_rates {
            for &layers in &self.grid.layers {
                for &hidden in &self.grid.hidden {
                    for &aggregator in &self.grid.aggregators {
                        out.push(SageConfig {
                            n_layers: layers,
                            hidden,
                            aggregator,
                            learning_rate: lr,
                            max_epochs: self.sage.max_epochs,
                            patience: self.sage.patience,
                            seed: self.seed,
                        });
                    }
                }
            }
        }
        out
    }

    /// Hash of the settings that determine a stage's output, including
    /// those of every stage upstream of it.
    pub fn stage_hash(&self, stage: Stage) -> String {
        let gen = json!({ "generate": self.gen_config() });
        let feat = json!({
            "upstream": gen,
            "features": {
                "selection": self.features.selection,
                "embed_dim": self.features.embed_dim,
                "precomputed": self.features.precomputed_dir.is_some(),
            },
            "split": self.split_spec(),
        });
        let graph = json!({ "upstream": feat, "tau": self.tau() });
        let sage = self.sage_config();
        let mlp = self.dense_config(&self.baselines.mlp_hidden);
        let value = match stage {
            Stage::Generate | Stage::Ingest => gen,
            Stage::Featurize => feat,
            Stage::Graph => graph,
            Stage::Train => json!({ "upstream": graph, "sage": sage, "mlp": mlp }),
            Stage::Grid => json!({ "upstream": graph, "grid": self.grid_configs() }),
            Stage::Ablate => json!({ "upstream": feat, "tau": self.tau(), "sage": sage }),
            Stage::Crossval => json!({
                "upstream": graph,
                "sage": sage,
                "mlp": mlp,
                "k_folds": self.k_folds,
                "paired": self.crossval.paired,
            }),
            Stage::Report => json!({
                "train": self.stage_hash(Stage::Train),
                "grid": self.stage_hash(Stage::Grid),
                "ablate": self.stage_hash(Stage::Ablate),
                "crossval": self.stage_hash(Stage::Crossval),
            }),
        };
        let body = json!({ "stage": stage.name(), "config": value });
        sha256_hex(body.to_string().as_bytes())
    }
}
