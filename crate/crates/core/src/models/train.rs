//! Full-batch transductive training with class-weighted BCE, Adam and
//! early stopping on the validation loss.

use serde::{Deserialize, Serialize};

use super::config::{DenseConfig, SageConfig};
use super::net::{build_dense, build_sage, DenseModel, Model, SageModel};
use crate::error::{Error, Result};
use crate::evalstat::{auroc, balanced_accuracy, predict_labels, Splits};
use crate::matrix::Matrix;
use crate::neuro::{class_weights, sigmoid, weighted_bce, Adam, Tape};
use crate::simgraph::SimilarityGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict decrease of
/// the monitored loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.waited = 0;
            return StopDecision::Improved;
        }
        self.waited += 1;
        if self.waited >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Wait
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
}

impl From<&SageConfig> for TrainOptions {
    fn from(c: &SageConfig) -> Self {
        TrainOptions {
            learning_rate: c.learning_rate,
            max_epochs: c.max_epochs,
            patience: c.patience,
        }
    }
}

impl From<&DenseConfig> for TrainOptions {
    fn from(c: &DenseConfig) -> Self {
        TrainOptions {
            learning_rate: c.learning_rate,
            max_epochs: c.max_epochs,
            patience: c.patience,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_auroc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub auroc: f64,
    pub bacc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub history: Vec<EpochLog>,
    pub val: SplitMetrics,
    pub test: SplitMetrics,
    /// Sigmoid outputs of the restored model for every node.
    pub probabilities: Vec<f64>,
}

fn split_metrics(prob: &[f64], labels: &[bool], rows: &[usize]) -> Result<SplitMetrics> {
    let p: Vec<f64> = rows.iter().map(|&i| prob[i]).collect();
    let y: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
    Ok(SplitMetrics {
        auroc: auroc(&p, &y)?,
        bacc: balanced_accuracy(&predict_labels(&p), &y)?,
    })
}

fn check_splits(n: usize, splits: &Splits) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in splits.train.iter().chain(&splits.val).chain(&splits.test) {
        if i >= n || seen[i] {
            return Err(Error::config("splits", format!("node {i} is out of range or repeated")));
        }
        seen[i] = true;
    }
    if splits.val.is_empty() || splits.test.is_empty() {
        return Err(Error::config("splits", "validation and test sets must be non-empty"));
    }
    Ok(())
}

/// Trains `model` in place and leaves it holding the parameters of the
/// epoch with the lowest validation loss.
///
/// Epoch `e` runs one forward pass with the parameters entering the epoch;
/// its logits give both the training loss and the validation metrics for
/// those parameters, then Adam takes one step on the training loss.
pub fn train<M: Model>(
    model: &mut M,
    graph: &SimilarityGraph,
    features: &Matrix,
    labels: &[bool],
    splits: &Splits,
    opts: &TrainOptions,
) -> Result<TrainResult> {
    let n = features.rows();
    if labels.len() != n || graph.n_nodes() != n {
        return Err(Error::shape(
            "train",
            format!("{n} labels and graph nodes"),
            format!("{} labels, {} nodes", labels.len(), graph.n_nodes()),
        ));
    }
    check_splits(n, splits)?;
    let targets: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
    let (w_pos, w_neg) = class_weights(&targets, &splits.train)?;
    let adam = Adam::new(opts.learning_rate)?;
    let mut stopper = EarlyStopping::new(opts.patience);
    let mut best_values = model.params().values();
    let mut history = Vec::new();
    let mut stopped_epoch = 0;

    for epoch in 1..=opts.max_epochs {
        stopped_epoch = epoch;
        let (train_loss, val_loss, val_auroc, grads) = {
            let mut tape = Tape::new();
            let z = model.forward(&mut tape, features, graph)?;
            let prob: Vec<f64> = tape.value(z).as_slice().iter().map(|&v| sigmoid(v)).collect();
            let val_loss = weighted_bce(&prob, &targets, w_pos, w_neg, &splits.val)?;
            let val_auroc = split_metrics(&prob, labels, &splits.val)?.auroc;
            let loss = tape.weighted_bce(z, &targets, &splits.train, w_pos, w_neg)?;
            let train_loss = tape.value(loss)[(0, 0)];
            (train_loss, val_loss, val_auroc, tape.backward(loss)?)
        };
        if !val_loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss is {val_loss} at epoch {epoch}")));
        }
        history.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_auroc,
        });
        log::info!(
            "epoch {epoch:>3} train_loss {train_loss:.5} val_loss {val_loss:.5} val_auroc {val_auroc:.4}"
        );
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best_values = model.params().values(),
            StopDecision::Wait => {}
            StopDecision::Stop => break,
        }
        model.params_mut().accumulate(&grads)?;
        adam.step(model.params_mut());
    }

    model.params_mut().load_values(&best_values)?;
    let probabilities = model.predict(features, graph)?;
    Ok(TrainResult {
        best_epoch: stopper.best_epoch(),
        stopped_epoch,
        history,
        val: split_metrics(&probabilities, labels, &splits.val)?,
        test: split_metrics(&probabilities, labels, &splits.test)?,
        probabilities,
    })
}

pub fn train_sage(
    config: &SageConfig,
    graph: &SimilarityGraph,
    features: &Matrix,
    labels: &[bool],
    splits: &Splits,
) -> Result<(SageModel, TrainResult)> {
    let mut model = build_sage(config, features.cols())?;
    let result = train(&mut model, graph, features, labels, splits, &config.into())?;
    Ok((model, result))
}

/// Dense baseline; the graph is not used.
pub fn train_dense(
    config: &DenseConfig,
    features: &Matrix,
    labels: &[bool],
    splits: &Splits,
) -> Result<(DenseModel, TrainResult)> {
    let mut model = build_dense(config, features.cols())?;
    let graph = SimilarityGraph::self_loops(features.rows());
    let result = train(&mut model, &graph, features, labels, splits, &config.into())?;
    Ok((model, result))
}

pub fn train_logreg(
    features: &Matrix,
    labels: &[bool],
    splits: &Splits,
    learning_rate: f64,
    seed: u64,
) -> Result<(DenseModel, TrainResult)> {
    let config = DenseConfig {
        seed,
        ..DenseConfig::logreg(learning_rate)
    };
    train_dense(&config, features, labels, splits)
}

pub fn train_mlp(
    features: &Matrix,
    labels: &[bool],
    splits: &Splits,
    hidden_layers: &[usize],
    learning_rate: f64,
    seed: u64,
) -> Result<(DenseModel, TrainResult)> {
    let config = DenseConfig {
        hidden_layers: hidden_layers.to_vec(),
        seed,
        ..DenseConfig::logreg(learning_rate)
    };
    train_dense(&config, features, labels, splits)
}
