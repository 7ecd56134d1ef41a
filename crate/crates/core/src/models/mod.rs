//! GraphSAGE and dense baselines, their training loop and the grid search.

mod config;
mod grid;
mod net;
mod train;

pub use config::{
    DenseConfig, SageConfig, HIDDEN_GRID, LAYER_GRID, LR_GRID, MAX_EPOCHS, PATIENCE,
};
pub use grid::{grid_search, write_grid_csv, GridRow};
pub use net::{build_dense, build_sage, DenseModel, Model, SageModel};
pub use train::{
    train, train_dense, train_logreg, train_mlp, train_sage, EarlyStopping, EpochLog, SplitMetrics,
    StopDecision, TrainOptions, TrainResult,
};
