use super::kernels::Aggregator;
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::Result;
use crate::simgraph::SimilarityGraph;

/// Parameter ids of one GraphSAGE layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SageWeights {
    pub w_self: ParamId,
    pub w_neigh: ParamId,
    pub bias: ParamId,
}

/// `H·W_self + aggregate(H)·W_neigh + b`, followed by ReLU when `activate`.
pub fn sage_layer<'g>(
    tape: &mut Tape<'g>,
    store: &'g ParamStore,
    h: Var,
    graph: &'g SimilarityGraph,
    weights: SageWeights,
    kind: Aggregator,
    activate: bool,
) -> Result<Var> {
    let ws = tape.param(store, weights.w_self);
    let wn = tape.param(store, weights.w_neigh);
    let b = tape.param(store, weights.bias);
    let own = tape.matmul(h, ws)?;
    let agg = tape.aggregate(h, graph, kind)?;
    let neigh = tape.matmul(agg, wn)?;
    let sum = tape.add(own, neigh)?;
    let out = tape.add_bias(sum, b)?;
    if activate {
        tape.relu(out)
    } else {
        Ok(out)
    }
}

/// `H·W + b`, followed by ReLU when `activate`.
pub fn dense_layer<'g>(
    tape: &mut Tape<'g>,
    store: &'g ParamStore,
    h: Var,
    w: ParamId,
    bias: ParamId,
    activate: bool,
) -> Result<Var> {
    let wv = tape.param(store, w);
    let bv = tape.param(store, bias);
    let z = tape.matmul(h, wv)?;
    let out = tape.add_bias(z, bv)?;
    if activate {
        tape.relu(out)
    } else {
        Ok(out)
    }
}
