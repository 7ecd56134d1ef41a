//! Reverse-mode tape over whole matrices.
//!
//! A [`Tape`] records one forward pass. Inputs and parameters are borrowed,
//! intermediate values are owned. [`Tape::backward`] walks the record in
//! reverse and returns gradients keyed by parameter; inputs never receive
//! gradients, so the dense feature matrix is never differentiated against.

use std::borrow::Cow;
use std::collections::BTreeMap;

use super::kernels::{self, Aggregator};
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::simgraph::SimilarityGraph;

/// Lower and upper clamp applied to probabilities inside the BCE loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'g> {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    Aggregate {
        x: Var,
        graph: &'g SimilarityGraph,
        kind: Aggregator,
        argmax: Option<Vec<u32>>,
    },
    /// Holds d(loss)/d(logit) computed during the forward pass.
    Bce { logits: Var, dlogits: Matrix },
}

struct Node<'g> {
    op: Op<'g>,
    value: Cow<'g, Matrix>,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape<'g> {
    nodes: Vec<Node<'g>>,
}

/// Parameter gradients produced by one backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Matrix>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Matrix)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

fn add_into(slot: &mut Option<Matrix>, g: Matrix) {
    match slot {
        Some(acc) => acc.add_assign(&g),
        None => *slot = Some(g),
    }
}

impl<'g> Tape<'g> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op<'g>, value: Cow<'g, Matrix>, needs_grad: bool) -> Result<Var> {
        #[cfg(debug_assertions)]
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite value produced by {}",
                op_name(&op)
            )));
        }
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, x: &'g Matrix) -> Var {
        self.nodes.push(Node {
            op: Op::Input,
            value: Cow::Borrowed(x),
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, store: &'g ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Cow::Borrowed(store.value(id)),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = kernels::matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::MatMul(a, b), Cow::Owned(out), ng)
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let out = kernels::add_bias(self.value(x), self.value(bias))?;
        let ng = self.needs(x) || self.needs(bias);
        self.push(Op::AddBias(x, bias), Cow::Owned(out), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "add",
                format!("{:?}", va.shape()),
                format!("{:?}", vb.shape()),
            ));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Add(a, b), Cow::Owned(out), ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = kernels::relu(self.value(x));
        let ng = self.needs(x);
        self.push(Op::Relu(x), Cow::Owned(out), ng)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let out = self.value(x).map(|v| v * s);
        let ng = self.needs(x);
        self.push(Op::Scale(x, s), Cow::Owned(out), ng)
    }

    pub fn aggregate(&mut self, x: Var, graph: &'g SimilarityGraph, kind: Aggregator) -> Result<Var> {
        let (out, argmax) = kernels::aggregate(self.value(x), graph, kind)?;
        let ng = self.needs(x);
        self.push(
            Op::Aggregate {
                x,
                graph,
                kind,
                argmax,
            },
            Cow::Owned(out),
            ng,
        )
    }

    /// Class-weighted binary cross-entropy on `n x 1` logits, averaged over
    /// the rows in `mask`:
    /// `-(1/|mask|) Σ [w_pos·y·ln p + w_neg·(1-y)·ln(1-p)]`, `p = σ(z)`
    /// clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`. Clamped rows pass no
    /// gradient.
    pub fn weighted_bce(
        &mut self,
        logits: Var,
        targets: &[f64],
        mask: &[usize],
        w_pos: f64,
        w_neg: f64,
    ) -> Result<Var> {
        let z = self.value(logits);
        if z.cols() != 1 || z.rows() != targets.len() {
            return Err(Error::shape(
                "weighted_bce",
                format!("{}x1 logits", targets.len()),
                format!("{}x{}", z.rows(), z.cols()),
            ));
        }
        if mask.is_empty() {
            return Err(Error::config("mask", "loss mask selects no rows"));
        }
        let inv = 1.0 / mask.len() as f64;
        let mut loss = 0.0;
        let mut dlogits = Matrix::zeros(z.rows(), 1);
        for &i in mask {
            let y = targets[i];
            let raw = kernels::sigmoid(z[(i, 0)]);
            let p = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= w_pos * y * p.ln() + w_neg * (1.0 - y) * (1.0 - p).ln();
            if p == raw {
                // d/dz of the bracket, using dp/dz = p(1-p)
                dlogits[(i, 0)] -= inv * (w_pos * y * (1.0 - p) - w_neg * (1.0 - y) * p);
            }
        }
        loss *= inv;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {loss}")));
        }
        let ng = self.needs(logits);
        self.push(
            Op::Bce { logits, dlogits },
            Cow::Owned(Matrix::filled(1, 1, loss)),
            ng,
        )
    }

    /// Gradients of the scalar `loss` with respect to every parameter that
    /// reaches it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let node = self.nodes.get(loss.0).ok_or_else(|| {
            Error::State("backward called before the loss was recorded".into())
        })?;
        if node.value.shape() != (1, 1) {
            return Err(Error::State(format!(
                "backward needs a scalar loss, got {:?}",
                node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        let mut out = Gradients::default();
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let send = |v: Var, gv: Matrix, grads: &mut Vec<Option<Matrix>>| {
                if self.needs(v) {
                    add_into(&mut grads[v.0], gv);
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(id) => match out.grads.get_mut(id) {
                    Some(acc) => acc.add_assign(&g),
                    None => {
                        out.grads.insert(*id, g);
                    }
                },
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        send(*a, kernels::matmul_nt(&g, self.value(*b))?, &mut grads);
                    }
                    if self.needs(*b) {
                        send(*b, kernels::matmul_tn(self.value(*a), &g)?, &mut grads);
                    }
                }
                Op::AddBias(x, b) => {
                    if self.needs(*b) {
                        send(*b, kernels::column_sums(&g), &mut grads);
                    }
                    send(*x, g, &mut grads);
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        send(*b, g.clone(), &mut grads);
                    }
                    send(*a, g, &mut grads);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    for (d, &y) in gx.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        if y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    send(*x, gx, &mut grads);
                }
                Op::Scale(x, s) => {
                    let mut gx = g;
                    gx.scale_in_place(*s);
                    send(*x, gx, &mut grads);
                }
                Op::Aggregate {
                    x,
                    graph,
                    kind,
                    argmax,
                } => {
                    let gx = kernels::aggregate_backward(&g, graph, *kind, argmax.as_deref())?;
                    send(*x, gx, &mut grads);
                }
                Op::Bce { logits, dlogits } => {
                    let mut gx = dlogits.clone();
                    gx.scale_in_place(g[(0, 0)]);
                    send(*logits, gx, &mut grads);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(debug_assertions)]
fn op_name(op: &Op<'_>) -> &'static str {
    match op {
        Op::Input => "input",
        Op::Param(_) => "param",
        Op::MatMul(..) => "matmul",
        Op::AddBias(..) => "add_bias",
        Op::Add(..) => "add",
        Op::Relu(_) => "relu",
        Op::Scale(..) => "scale",
        Op::Aggregate { .. } => "aggregate",
        Op::Bce { .. } => "weighted_bce",
    }
}

/// Class weights `w_c = N / (2·N_c)` over the rows in `mask`; returns
/// `(w_pos, w_neg)`.
pub fn class_weights(targets: &[f64], mask: &[usize]) -> Result<(f64, f64)> {
    let n = mask.len();
    let pos = mask.iter().filter(|&&i| targets[i] >= 0.5).count();
    if pos == 0 || pos == n {
        return Err(Error::config(
            "labels",
            "training rows must contain both classes",
        ));
    }
    Ok((
        n as f64 / (2.0 * pos as f64),
        n as f64 / (2.0 * (n - pos) as f64),
    ))
}

/// Value of the weighted BCE on probabilities, without recording anything.
pub fn weighted_bce(p: &[f64], y: &[f64], w_pos: f64, w_neg: f64, mask: &[usize]) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::shape("weighted_bce", p.len(), y.len()));
    }
    if mask.is_empty() {
        return Err(Error::config("mask", "loss mask selects no rows"));
    }
    let mut loss = 0.0;
    for &i in mask {
        let q = p[i].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= w_pos * y[i] * q.ln() + w_neg * (1.0 - y[i]) * (1.0 - q).ln();
    }
    Ok(loss / mask.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_gives_ln2() {
        let y = [1.0, 0.0, 1.0, 0.0];
        let mask = [0, 1, 2, 3];
        let loss = weighted_bce(&[0.5; 4], &y, 1.0, 1.0, &mask).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        let z = Matrix::zeros(4, 1);
        let mut tape = Tape::new();
        let v = tape.input(&z);
        let l = tape.weighted_bce(v, &y, &mask, 1.0, 1.0).unwrap();
        assert!((tape.value(l)[(0, 0)] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_hits_clamp_floor() {
        let loss = weighted_bce(&[1.0, 0.0], &[1.0, 0.0], 1.0, 1.0, &[0, 1]).unwrap();
        assert!((loss - -(1.0 - PROB_CLAMP).ln()).abs() < 1e-15);
    }

    #[test]
    fn reference_class_weights() {
        let n = 303_571usize;
        let pos = 51_985usize;
        let y: Vec<f64> = (0..n).map(|i| if i < pos { 1.0 } else { 0.0 }).collect();
        let mask: Vec<usize> = (0..n).collect();
        let (wp, wn) = class_weights(&y, &mask).unwrap();
        assert_eq!(format!("{wp:.4}"), "2.9198");
        assert_eq!(format!("{wn:.4}"), "0.6033");
    }

    #[test]
    fn one_class_or_empty_mask_rejected() {
        assert!(class_weights(&[1.0, 1.0], &[0, 1]).is_err());
        assert!(weighted_bce(&[0.5], &[1.0], 1.0, 1.0, &[]).is_err());
    }

    #[test]
    fn backward_requires_recorded_scalar() {
        let tape = Tape::new();
        assert!(matches!(tape.backward(Var(0)), Err(Error::State(_))));
        let x = Matrix::zeros(2, 2);
        let mut tape = Tape::new();
        let v = tape.input(&x);
        assert!(matches!(tape.backward(v), Err(Error::State(_))));
    }

    #[test]
    fn unused_parameter_has_no_gradient_and_loss_scaling_is_linear() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::from_vec(2, 1, vec![0.3, -0.2]).unwrap());
        let unused = store.add("u", Matrix::filled(1, 1, 1.0));
        let x = Matrix::from_vec(3, 2, vec![1.0, 2.0, -1.0, 0.5, 0.0, 1.0]).unwrap();
        let y = [1.0, 0.0, 1.0];
        let run = |s: f64| {
            let mut tape = Tape::new();
            let xv = tape.input(&x);
            let wv = tape.param(&store, w);
            let z = tape.matmul(xv, wv).unwrap();
            let l = tape.weighted_bce(z, &y, &[0, 1, 2], 1.5, 0.75).unwrap();
            let l = tape.scale(l, s).unwrap();
            tape.backward(l).unwrap()
        };
        let g1 = run(1.0);
        let g2 = run(2.0);
        assert!(g1.get(unused).is_none());
        let mut doubled = g1.get(w).unwrap().clone();
        doubled.scale_in_place(2.0);
        assert_eq!(&doubled, g2.get(w).unwrap());
        let mut store2 = store.clone();
        store2.accumulate(&g1).unwrap();
        assert_eq!(store2.get(unused).grad[(0, 0)], 0.0);
    }
}
