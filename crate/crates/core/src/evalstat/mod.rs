//! Metrics, grouped splitting, cross-validation folds and the model
//! comparison statistics.

mod metrics;
mod splits;
mod stats;

use serde::{Deserialize, Serialize};

pub use metrics::{auroc, balanced_accuracy, predict_labels};
pub use splits::{make_folds, make_splits, FoldPlan, SplitSpec, Splits, DEFAULT_FRACTIONS};
pub use stats::{shapiro_wilk, student_t_two_sided, t_test, ShapiroWilk, TTest, P_FLOOR};

use crate::error::{Error, Result};

/// Significance level for pairwise comparisons.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auroc,
    Bacc,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Auroc, Metric::Bacc];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auroc => "AUROC",
            Metric::Bacc => "BAcc",
        }
    }
}

/// Per-fold metric vectors of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub model: String,
    pub auroc: Vec<f64>,
    pub bacc: Vec<f64>,
}

impl FoldMetrics {
    pub fn get(&self, metric: Metric) -> &[f64] {
        match metric {
            Metric::Auroc => &self.auroc,
            Metric::Bacc => &self.bacc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityRow {
    pub model: String,
    pub metric: Metric,
    pub w: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model_a: String,
    pub model_b: String,
    pub metric: Metric,
    pub statistic: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub paired: bool,
    pub folds: Vec<FoldMetrics>,
    pub normality: Vec<NormalityRow>,
    pub comparisons: Vec<ComparisonRow>,
}

/// Shapiro-Wilk for every model and metric, then a t-test for every model
/// pair (in input order) and metric.
pub fn compare_models(models: &[FoldMetrics], paired: bool) -> Result<StatReport> {
    if models.len() < 2 {
        return Err(Error::config("models", "need at least two models to compare"));
    }
    let k = models[0].auroc.len();
    for m in models {
        if m.auroc.len() != k || m.bacc.len() != k {
            return Err(Error::shape(
                "compare_models",
                format!("{k} folds per metric"),
                format!("{} has {}/{}", m.model, m.auroc.len(), m.bacc.len()),
            ));
        }
    }
    let mut normality = vec![];
    for m in models {
        for metric in Metric::ALL {
            let sw = shapiro_wilk(m.get(metric))?;
            normality.push(NormalityRow {
                model: m.model.clone(),
                metric,
                w: sw.w,
                p: sw.p,
            });
        }
    }
    let mut comparisons = vec![];
    for metric in Metric::ALL {
        for i in 0..models.len() {
            for j in i + 1..models.len() {
                let t = t_test(models[i].get(metric), models[j].get(metric), paired)?;
                comparisons.push(ComparisonRow {
                    model_a: models[i].model.clone(),
                    model_b: models[j].model.clone(),
                    metric,
                    statistic: t.statistic,
                    p: t.p,
                    significant: t.p < ALPHA,
                });
            }
        }
    }
    Ok(StatReport {
        paired,
        folds: models.to_vec(),
        normality,
        comparisons,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(name: &str, shift: f64) -> FoldMetrics {
        FoldMetrics {
            model: name.into(),
            auroc: (0..20).map(|i| 0.7 + shift + 0.001 * ((i * 7) % 11) as f64).collect(),
            bacc: (0..20).map(|i| 0.65 + shift + 0.001 * ((i * 5) % 13) as f64).collect(),
        }
    }

    #[test]
    fn three_models_give_three_pairs_per_metric() {
        let r = compare_models(&[fm("a", 0.0), fm("b", 0.01), fm("c", 0.02)], true).unwrap();
        assert_eq!(r.normality.len(), 6);
        assert_eq!(r.comparisons.len(), 6);
        assert!(r.comparisons.iter().all(|c| (0.0..=1.0).contains(&c.p)));
    }

    #[test]
    fn self_comparison_is_zero() {
        let r = compare_models(&[fm("a", 0.0), fm("a", 0.0)], true).unwrap();
        assert!(r.comparisons.iter().all(|c| c.statistic == 0.0 && !c.significant));
    }

    #[test]
    fn mismatched_fold_counts_rejected() {
        let mut b = fm("b", 0.0);
        b.auroc.pop();
        assert!(compare_models(&[fm("a", 0.0), b], true).is_err());
    }
}
