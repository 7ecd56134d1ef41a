//! Dense and neighborhood kernels shared by the tape's forward and
//! backward passes. All are row-parallel and sum in a fixed order, so
//! results are bitwise independent of the thread count.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::par;
use crate::simgraph::SimilarityGraph;

fn dims(m: &Matrix) -> String {
    format!("{}x{}", m.rows(), m.cols())
}

/// `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.rows() {
        return Err(Error::shape(
            "matmul",
            format!("rhs with {} rows", a.cols()),
            dims(b),
        ));
    }
    let mut out = Matrix::zeros(a.rows(), b.cols());
    par::for_each_row_mut(out.as_mut_slice(), b.cols(), |i, row| {
        for (k, &x) in a.row(i).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (o, &y) in row.iter_mut().zip(b.row(k)) {
                *o += x * y;
            }
        }
    });
    Ok(out)
}

/// `aᵀ · b`.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows() != b.rows() {
        return Err(Error::shape(
            "matmul_tn",
            format!("rhs with {} rows", a.rows()),
            dims(b),
        ));
    }
    matmul(&a.transpose(), b)
}

/// `a · bᵀ`.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::shape(
            "matmul_nt",
            format!("rhs with {} columns", a.cols()),
            dims(b),
        ));
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    par::for_each_row_mut(out.as_mut_slice(), b.rows(), |i, row| {
        let ar = a.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(ar, b.row(j));
        }
    });
    Ok(out)
}

/// Adds the `1 x d` row `bias` to every row of `x`.
pub fn add_bias(x: &Matrix, bias: &Matrix) -> Result<Matrix> {
    if bias.rows() != 1 || bias.cols() != x.cols() {
        return Err(Error::shape("add_bias", format!("1x{}", x.cols()), dims(bias)));
    }
    let mut out = x.clone();
    let b = bias.row(0);
    par::for_each_row_mut(out.as_mut_slice(), x.cols(), |_, row| {
        for (o, &v) in row.iter_mut().zip(b) {
            *o += v;
        }
    });
    Ok(out)
}

/// Column sums as a `1 x d` row.
pub fn column_sums(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, x.cols());
    for row in x.iter_rows() {
        for (o, &v) in out.row_mut(0).iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

pub fn relu(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Mean,
    Max,
    Add,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Mean, Aggregator::Max, Aggregator::Add];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Max => "max",
            Aggregator::Add => "add",
        }
    }

    /// Mean and add are linear in the node features.
    pub fn is_linear(self) -> bool {
        self != Aggregator::Max
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Aggregator::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("aggregator", format!("unknown aggregator `{s}`")))
    }
}

/// Row `i` of the result combines the rows of `h` over the neighbors of
/// `i` (self-loop included). For `Max` the second value holds, per output
/// entry, the neighbor that supplied it; ties go to the lowest index.
pub fn aggregate(
    h: &Matrix,
    g: &SimilarityGraph,
    kind: Aggregator,
) -> Result<(Matrix, Option<Vec<u32>>)> {
    if h.rows() != g.n_nodes() {
        return Err(Error::shape(
            "aggregate",
            format!("{} rows", g.n_nodes()),
            dims(h),
        ));
    }
    let d = h.cols();
    match kind {
        Aggregator::Mean | Aggregator::Add => {
            let mut out = Matrix::zeros(h.rows(), d);
            par::for_each_row_mut(out.as_mut_slice(), d, |i, row| {
                let nbrs = g.neighbors(i);
                for &j in nbrs {
                    for (o, &v) in row.iter_mut().zip(h.row(j as usize)) {
                        *o += v;
                    }
                }
                if kind == Aggregator::Mean {
                    let inv = 1.0 / nbrs.len() as f64;
                    row.iter_mut().for_each(|o| *o *= inv);
                }
            });
            Ok((out, None))
        }
        Aggregator::Max => {
            let rows = par::map_range(h.rows(), |i| {
                let nbrs = g.neighbors(i);
                let first = nbrs[0];
                let mut best = h.row(first as usize).to_vec();
                let mut arg = vec![first; d];
                for &j in &nbrs[1..] {
                    for (k, &v) in h.row(j as usize).iter().enumerate() {
                        if v > best[k] {
                            best[k] = v;
                            arg[k] = j;
                        }
                    }
                }
                (best, arg)
            });
            let mut data = Vec::with_capacity(h.rows() * d);
            let mut argmax = Vec::with_capacity(h.rows() * d);
            for (best, arg) in rows {
                data.extend(best);
                argmax.extend(arg);
            }
            Ok((Matrix::from_vec(h.rows(), d, data)?, Some(argmax)))
        }
    }
}

/// Gradient of [`aggregate`] with respect to its input. Uses the graph's
/// symmetry to gather instead of scatter: node `j` receives from every `i`
/// with `j ∈ N(i)`, which is exactly `N(j)`.
pub fn aggregate_backward(
    grad_out: &Matrix,
    g: &SimilarityGraph,
    kind: Aggregator,
    argmax: Option<&[u32]>,
) -> Result<Matrix> {
    if grad_out.rows() != g.n_nodes() {
        return Err(Error::shape(
            "aggregate_backward",
            format!("{} rows", g.n_nodes()),
            dims(grad_out),
        ));
    }
    let d = grad_out.cols();
    let mut out = Matrix::zeros(grad_out.rows(), d);
    match kind {
        Aggregator::Mean | Aggregator::Add => {
            par::for_each_row_mut(out.as_mut_slice(), d, |j, row| {
                for &i in g.neighbors(j) {
                    let i = i as usize;
                    let w = if kind == Aggregator::Mean {
                        1.0 / g.degree(i) as f64
                    } else {
                        1.0
                    };
                    for (o, &v) in row.iter_mut().zip(grad_out.row(i)) {
                        *o += w * v;
                    }
                }
            });
        }
        Aggregator::Max => {
            let argmax = argmax.ok_or_else(|| {
                Error::State("max aggregation backward needs the forward argmax".into())
            })?;
            if argmax.len() != grad_out.rows() * d {
                return Err(Error::shape(
                    "aggregate_backward",
                    format!("{} argmax entries", grad_out.rows() * d),
                    argmax.len(),
                ));
            }
            par::for_each_row_mut(out.as_mut_slice(), d, |j, row| {
                for &i in g.neighbors(j) {
                    let i = i as usize;
                    let src = &argmax[i * d..(i + 1) * d];
                    for (k, o) in row.iter_mut().enumerate() {
                        if src[k] as usize == j {
                            *o += grad_out[(i, k)];
                        }
                    }
                }
            });
        }
    }
    Ok(out)
}
