//! Per-block scaling: min-max for admissions and lab blocks, row-wise L2
//! normalization for embedding blocks.

use serde::{Deserialize, Serialize};

use super::{BlockKind, NodeFeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SpanScaler {
    MinMax {
        kind: BlockKind,
        offset: usize,
        min: Vec<f64>,
        max: Vec<f64>,
    },
    L2 {
        kind: BlockKind,
        offset: usize,
        width: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerSet {
    pub spans: Vec<SpanScaler>,
}

/// Fits min/max on `train_rows` for the min-max blocks.
pub fn fit_scalers(features: &NodeFeatureMatrix, train_rows: &[usize]) -> Result<ScalerSet> {
    if train_rows.is_empty() {
        return Err(Error::config("train_rows", "scalers need at least one training row"));
    }
    let m = &features.matrix;
    let spans = features
        .spans
        .iter()
        .map(|span| {
            if span.kind.is_min_max() {
                let mut min = vec![f64::INFINITY; span.width];
                let mut max = vec![f64::NEG_INFINITY; span.width];
                for &r in train_rows {
                    let row = &m.row(r)[span.offset..span.offset + span.width];
                    for (k, &v) in row.iter().enumerate() {
                        min[k] = min[k].min(v);
                        max[k] = max[k].max(v);
                    }
                }
                SpanScaler::MinMax {
                    kind: span.kind,
                    offset: span.offset,
                    min,
                    max,
                }
            } else {
                SpanScaler::L2 {
                    kind: span.kind,
                    offset: span.offset,
                    width: span.width,
                }
            }
        })
        .collect();
    Ok(ScalerSet { spans })
}

#[inline]
fn min_max(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn apply_scalers(features: &NodeFeatureMatrix, scalers: &ScalerSet) -> Result<NodeFeatureMatrix> {
    if scalers.spans.len() != features.spans.len() {
        return Err(Error::Alignment(format!(
            "scaler covers {} blocks, matrix has {}",
            scalers.spans.len(),
            features.spans.len()
        )));
    }
    for (s, span) in scalers.spans.iter().zip(&features.spans) {
        let (kind, offset, width) = match s {
            SpanScaler::MinMax { kind, offset, min, .. } => (*kind, *offset, min.len()),
            SpanScaler::L2 { kind, offset, width } => (*kind, *offset, *width),
        };
        if kind != span.kind || offset != span.offset || width != span.width {
            return Err(Error::Alignment(format!(
                "scaler block {kind:?}@{offset}+{width} does not match {:?}@{}+{}",
                span.kind, span.offset, span.width
            )));
        }
    }
    let mut out: Matrix = features.matrix.clone();
    let cols = out.cols();
    par::for_each_row_mut(out.as_mut_slice(), cols, |_, row| {
        for s in &scalers.spans {
            match s {
                SpanScaler::MinMax { offset, min, max, .. } => {
                    let seg = &mut row[*offset..*offset + min.len()];
                    for (k, v) in seg.iter_mut().enumerate() {
                        *v = min_max(*v, min[k], max[k]);
                    }
                }
                SpanScaler::L2 { offset, width, .. } => {
                    let seg = &mut row[*offset..*offset + *width];
                    let norm = seg.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        seg.iter_mut().for_each(|x| *x /= norm);
                    }
                }
            }
        }
    });
    Ok(NodeFeatureMatrix {
        matrix: out,
        spans: features.spans.clone(),
        ids: features.ids.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::BlockSpan;

    fn nfm(rows: &[Vec<f64>]) -> NodeFeatureMatrix {
        NodeFeatureMatrix {
            matrix: Matrix::from_rows(rows).unwrap(),
            spans: vec![
                BlockSpan {
                    kind: BlockKind::Admissions,
                    offset: 0,
                    width: 2,
                },
                BlockSpan {
                    kind: BlockKind::Notes,
                    offset: 2,
                    width: 2,
                },
            ],
            ids: (0..rows.len() as u64).collect(),
        }
    }

    #[test]
    fn min_max_fit_on_train_rows_and_clamp() {
        let f = nfm(&[
            vec![0.0, 5.0, 0.0, 2.0],
            vec![10.0, 5.0, 0.0, 0.0],
            vec![20.0, 5.0, 3.0, 4.0],
        ]);
        let s = fit_scalers(&f, &[0, 1]).unwrap();
        let out = apply_scalers(&f, &s).unwrap();
        assert_eq!(out.matrix.row(0)[..2], [0.0, 0.0]);
        assert_eq!(out.matrix.row(1)[..2], [1.0, 0.0]);
        // test row beyond the training range clamps to 1; constant column is 0
        assert_eq!(out.matrix.row(2)[..2], [1.0, 0.0]);
        // norm 2 row -> unit; zero row stays zero
        assert_eq!(out.matrix.row(0)[2..], [0.0, 1.0]);
        assert_eq!(out.matrix.row(1)[2..], [0.0, 0.0]);
        let n: f64 = out.matrix.row(2)[2..].iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_train_rows_rejected() {
        let f = nfm(&[vec![0.0; 4]]);
        assert!(matches!(fit_scalers(&f, &[]), Err(Error::Config { .. })));
    }
}
