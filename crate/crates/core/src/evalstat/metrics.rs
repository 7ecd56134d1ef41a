use crate::error::{Error, Result};

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

/// Area under the ROC curve through the Mann-Whitney statistic with
/// midranks, i.e. `P(s_pos > s_neg) + ½·P(s_pos = s_neg)`.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auroc", scores.len(), labels.len()));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::MetricUndefined("AUROC needs both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::MetricUndefined("non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the positive rank sum keeps midranks integral
    let mut rank_sum2: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the midrank (i+j+2)/2
        let mid2 = (i + j + 2) as u64;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k]).count() as u64;
        rank_sum2 += mid2 * pos_in_tie;
        i = j + 1;
    }
    let n1 = n_pos as u64;
    let u2 = rank_sum2 - n1 * (n1 + 1);
    Ok(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Mean of sensitivity and specificity.
pub fn balanced_accuracy(predicted: &[bool], labels: &[bool]) -> Result<f64> {
    if predicted.len() != labels.len() {
        return Err(Error::shape("balanced_accuracy", labels.len(), predicted.len()));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::MetricUndefined(
            "balanced accuracy needs both classes".into(),
        ));
    }
    let tp = predicted.iter().zip(labels).filter(|(&p, &l)| p && l).count();
    let tn = predicted.iter().zip(labels).filter(|(&p, &l)| !p && !l).count();
    Ok((tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64) / 2.0)
}

/// Sigmoid outputs thresholded at 0.5.
pub fn predict_labels(probabilities: &[f64]) -> Vec<bool> {
    probabilities.iter().map(|&p| p >= 0.5).collect()
}
