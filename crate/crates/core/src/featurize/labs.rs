use std::collections::HashMap;

use crate::datagen::{LabEventRow, LabFlag};
use crate::matrix::Matrix;
use crate::schema;

/// Fixed lab item vocabulary; column `k` is item `items[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabVocab {
    items: Vec<u32>,
    index: HashMap<u32, usize>,
}

impl LabVocab {
    pub fn new(items: Vec<u32>) -> Self {
        let index = items.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        LabVocab { items, index }
    }

    /// Item ids `50800..50800 + n`, as emitted by the generator.
    pub fn synthetic(n: usize) -> Self {
        LabVocab::new((0..n).map(schema::lab_item_id).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn column(&self, item: u32) -> Option<usize> {
        self.index.get(&item).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabReport {
    /// Events whose item is outside the vocabulary (dropped).
    pub dropped_out_of_vocab: usize,
    /// Events of admissions outside the cohort (ignored).
    pub ignored_other_admissions: usize,
}

/// Percent-abnormal encoding: cell `(a, item)` is the fraction of the
/// admission's events for that item flagged abnormal, 0 when unmeasured.
/// Returns the block and a per-row "no lab events" mask.
pub fn encode_labevents(
    events: &[LabEventRow],
    admission_ids: &[u64],
    vocab: &LabVocab,
) -> (Matrix, Vec<bool>, LabReport) {
    let row_of: HashMap<u64, usize> = admission_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();
    let width = vocab.len();
    let mut total = vec![0u32; admission_ids.len() * width];
    let mut abnormal = vec![0u32; admission_ids.len() * width];
    let mut has_events = vec![false; admission_ids.len()];
    let mut report = LabReport::default();
    for e in events {
        let Some(&row) = row_of.get(&e.hadm_id) else {
            report.ignored_other_admissions += 1;
            continue;
        };
        let Some(col) = vocab.column(e.itemid) else {
            report.dropped_out_of_vocab += 1;
            continue;
        };
        has_events[row] = true;
        total[row * width + col] += 1;
        if e.flag == LabFlag::Abnormal {
            abnormal[row * width + col] += 1;
        }
    }
    let data = total
        .iter()
        .zip(&abnormal)
        .map(|(&t, &a)| if t == 0 { 0.0 } else { a as f64 / t as f64 })
        .collect();
    let matrix = Matrix::from_vec(admission_ids.len(), width, data).expect("sized above");
    let missing = has_events.iter().map(|h| !h).collect();
    (matrix, missing, report)
}
