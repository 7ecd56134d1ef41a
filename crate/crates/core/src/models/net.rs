use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{DenseConfig, SageConfig};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::neuro::{dense_layer, sage_layer, sigmoid, ParamId, ParamStore, SageWeights, Tape, Var};
use crate::simgraph::SimilarityGraph;

/// A network producing one logit per node.
pub trait Model {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn in_dim(&self) -> usize;
    /// Records the forward pass and returns the `n x 1` logits.
    fn forward<'g>(
        &'g self,
        tape: &mut Tape<'g>,
        x: &'g Matrix,
        graph: &'g SimilarityGraph,
    ) -> Result<Var>;
    /// Architecture and hyperparameters for checkpoints.
    fn describe(&self) -> serde_json::Value;

    /// Sigmoid outputs for every node.
    fn predict(&self, x: &Matrix, graph: &SimilarityGraph) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let z = self.forward(&mut tape, x, graph)?;
        Ok(tape.value(z).as_slice().iter().map(|&v| sigmoid(v)).collect())
    }
}

fn check_input(x: &Matrix, in_dim: usize) -> Result<()> {
    if x.cols() != in_dim {
        return Err(Error::shape("forward", format!("{in_dim} feature columns"), x.cols()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SageModel {
    pub config: SageConfig,
    in_dim: usize,
    store: ParamStore,
    layers: Vec<SageWeights>,
}

/// GraphSAGE stack: `n_layers` layers of width `hidden`, the last one
/// mapping to a single logit without activation.
pub fn build_sage(config: &SageConfig, in_dim: usize) -> Result<SageModel> {
    config.validate()?;
    if in_dim == 0 {
        return Err(Error::config("in_dim", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let mut layers = Vec::with_capacity(config.n_layers);
    let mut d_in = in_dim;
    for k in 0..config.n_layers {
        let d_out = if k + 1 == config.n_layers { 1 } else { config.hidden };
        layers.push(SageWeights {
            w_self: store.add_glorot(format!("sage{k}.w_self"), d_in, d_out, &mut rng),
            w_neigh: store.add_glorot(format!("sage{k}.w_neigh"), d_in, d_out, &mut rng),
            bias: store.add_zeros(format!("sage{k}.bias"), 1, d_out),
        });
        d_in = d_out;
    }
    Ok(SageModel {
        config: config.clone(),
        in_dim,
        store,
        layers,
    })
}

impl SageModel {
    pub fn layers(&self) -> &[SageWeights] {
        &self.layers
    }
}

#[derive(Serialize)]
struct Described<'a, C> {
    kind: &'a str,
    in_dim: usize,
    config: &'a C,
}

impl Model for SageModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn forward<'g>(
        &'g self,
        tape: &mut Tape<'g>,
        x: &'g Matrix,
        graph: &'g SimilarityGraph,
    ) -> Result<Var> {
        check_input(x, self.in_dim)?;
        let mut h = tape.input(x);
        let last = self.layers.len() - 1;
        for (k, w) in self.layers.iter().enumerate() {
            h = sage_layer(tape, &self.store, h, graph, *w, self.config.aggregator, k < last)?;
        }
        Ok(h)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(Described {
            kind: "graphsage",
            in_dim: self.in_dim,
            config: &self.config,
        })
        .expect("plain data")
    }
}

#[derive(Debug, Clone)]
pub struct DenseModel {
    pub config: DenseConfig,
    in_dim: usize,
    store: ParamStore,
    layers: Vec<(ParamId, ParamId)>,
}

/// ReLU layers of the given widths followed by a linear logit.
pub fn build_dense(config: &DenseConfig, in_dim: usize) -> Result<DenseModel> {
    config.validate()?;
    if in_dim == 0 {
        return Err(Error::config("in_dim", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut store = ParamStore::new();
    let mut layers = vec![];
    let mut d_in = in_dim;
    for (k, &d_out) in config.hidden_layers.iter().chain(&[1]).enumerate() {
        layers.push((
            store.add_glorot(format!("dense{k}.w"), d_in, d_out, &mut rng),
            store.add_zeros(format!("dense{k}.bias"), 1, d_out),
        ));
        d_in = d_out;
    }
    Ok(DenseModel {
        config: config.clone(),
        in_dim,
        store,
        layers,
    })
}

impl DenseModel {
    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }
}

impl Model for DenseModel {
    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn forward<'g>(
        &'g self,
        tape: &mut Tape<'g>,
        x: &'g Matrix,
        _graph: &'g SimilarityGraph,
    ) -> Result<Var> {
        check_input(x, self.in_dim)?;
        let mut h = tape.input(x);
        let last = self.layers.len() - 1;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            h = dense_layer(tape, &self.store, h, w, b, k < last)?;
        }
        Ok(h)
    }

    fn describe(&self) -> serde_json::Value {
        let kind = if self.config.hidden_layers.is_empty() { "logreg" } else { "mlp" };
        serde_json::to_value(Described {
            kind,
            in_dim: self.in_dim,
            config: &self.config,
        })
        .expect("plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuro::Aggregator;

    #[test]
    fn reference_parameter_count() {
        let m = build_sage(&SageConfig::new(2, 64, Aggregator::Mean, 1e-5), 3238).unwrap();
        let first = 3238 * 64 * 2 + 64;
        let last = 64 * 2 + 1;
        assert_eq!((first, last), (414_528, 129));
        assert_eq!(m.params().num_scalars(), first + last);
        assert_eq!(m.params().num_scalars(), 414_657);
    }

    #[test]
    fn hidden_48_rejected() {
        assert!(build_sage(&SageConfig::new(2, 48, Aggregator::Mean, 1e-5), 10).is_err());
        assert!(build_sage(&SageConfig::new(2, 32, Aggregator::Mean, 1e-5), 0).is_err());
    }

    #[test]
    fn logreg_has_one_layer() {
        let m = build_dense(&DenseConfig::logreg(1e-3), 7).unwrap();
        assert_eq!(m.params().num_scalars(), 8);
        assert_eq!(m.describe()["kind"], "logreg");
    }
}
