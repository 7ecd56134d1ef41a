//! Trainable parameters, Glorot initialization and Adam.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::Gradients;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Value, gradient accumulator and Adam moments; all four share a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = value.shape();
        Parameter {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    /// Glorot-uniform weights: `U(-a, a)` with `a = sqrt(6 / (rows + cols))`.
    pub fn add_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> ParamId {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a);
        let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
        self.add(name, Matrix::from_vec(rows, cols, data).expect("sized above"))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Matrix::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.as_slice().len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.scale_in_place(0.0);
        }
    }

    /// Adds `grads` into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<()> {
        for (id, g) in grads.iter() {
            let p = self
                .params
                .get_mut(id.0)
                .ok_or_else(|| Error::State(format!("gradient for unknown parameter {}", id.0)))?;
            if p.grad.shape() != g.shape() {
                return Err(Error::shape(
                    "accumulate",
                    format!("{:?}", p.grad.shape()),
                    format!("{:?}", g.shape()),
                ));
            }
            p.grad.add_assign(g);
        }
        Ok(())
    }

    /// Copies values (not optimizer state) from a store of the same layout.
    pub fn load_values(&mut self, values: &[Matrix]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::shape("load_values", self.params.len(), values.len()));
        }
        for (p, v) in self.params.iter_mut().zip(values) {
            if p.value.shape() != v.shape() {
                return Err(Error::shape(
                    "load_values",
                    format!("{:?}", p.value.shape()),
                    format!("{:?}", v.shape()),
                ));
            }
            p.value = v.clone();
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<Matrix> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::config("learning_rate", format!("{lr} must be positive")));
        }
        Ok(Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        })
    }

    /// One bias-corrected update of every parameter from its accumulated
    /// gradient; gradients are zeroed afterwards.
    pub fn step(&self, store: &mut ParamStore) {
        let (b1, b2) = (self.beta1, self.beta2);
        for p in &mut store.params {
            p.step += 1;
            let t = p.step as i32;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            let value = p.value.as_mut_slice();
            let grad = p.grad.as_mut_slice();
            let m = p.m.as_mut_slice();
            let v = p.v.as_mut_slice();
            for k in 0..value.len() {
                let g = grad[k];
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                value[k] -= self.lr * mhat / (vhat.sqrt() + self.eps);
                grad[k] = 0.0;
            }
        }
    }
}
