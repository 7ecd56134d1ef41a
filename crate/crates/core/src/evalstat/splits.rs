//! Patient-grouped, label-stratified splits and folds.
//!
//! Patients are dealt greedily: within each stratum (any positive
//! admission or none), larger patients go first, ties broken by a seeded
//! hash of the id, and each patient lands in the bucket whose admission
//! count is furthest below its target share. Every admission of a patient
//! shares the patient's bucket.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::mix;

/// Node indices of the three holdout sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            fractions: DEFAULT_FRACTIONS,
            seed,
        }
    }
}

/// `k` folds of node indices; fold `f` is the test set of round `f`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Round `f`: fold `f` tests, fold `f + 1 (mod k)` validates, the rest
    /// train.
    pub fn round(&self, f: usize) -> Splits {
        let k = self.k();
        let v = (f + 1) % k;
        let mut train: Vec<usize> = (0..k)
            .filter(|&i| i != f && i != v)
            .flat_map(|i| self.folds[i].iter().copied())
            .collect();
        train.sort_unstable();
        Splits {
            train,
            val: self.folds[v].clone(),
            test: self.folds[f].clone(),
        }
    }
}

struct Patient {
    id: u64,
    nodes: Vec<usize>,
    positive: bool,
}

fn group_patients(patient_ids: &[u64], labels: &[bool]) -> Result<Vec<Patient>> {
    if patient_ids.len() != labels.len() {
        return Err(Error::shape("group_patients", patient_ids.len(), labels.len()));
    }
    if patient_ids.is_empty() {
        return Err(Error::config("cohort", "no admissions to split"));
    }
    let mut map: BTreeMap<u64, Patient> = BTreeMap::new();
    for (node, (&id, &label)) in patient_ids.iter().zip(labels).enumerate() {
        let p = map.entry(id).or_insert_with(|| Patient {
            id,
            nodes: vec![],
            positive: false,
        });
        p.nodes.push(node);
        p.positive |= label;
    }
    Ok(map.into_values().collect())
}

/// Deals patients into `weights.len()` buckets; returns each bucket's
/// sorted node indices.
fn deal(mut patients: Vec<Patient>, weights: &[f64], seed: u64) -> Vec<Vec<usize>> {
    patients.sort_by(|a, b| {
        (a.positive, std::cmp::Reverse(a.nodes.len()), mix(seed, a.id)).cmp(&(
            b.positive,
            std::cmp::Reverse(b.nodes.len()),
            mix(seed, b.id),
        ))
    });
    let mut buckets = vec![Vec::new(); weights.len()];
    // admissions already assigned, per stratum and bucket
    let mut filled = [vec![0usize; weights.len()], vec![0usize; weights.len()]];
    for p in patients {
        let fill = &mut filled[p.positive as usize];
        let best = (0..weights.len())
            .min_by(|&a, &b| {
                let ra = fill[a] as f64 / weights[a];
                let rb = fill[b] as f64 / weights[b];
                ra.total_cmp(&rb)
            })
            .expect("at least one bucket");
        fill[best] += p.nodes.len();
        buckets[best].extend(p.nodes);
    }
    for b in &mut buckets {
        b.sort_unstable();
    }
    buckets
}

/// Holdout split over nodes, grouped by patient.
pub fn make_splits(patient_ids: &[u64], labels: &[bool], spec: &SplitSpec) -> Result<Splits> {
    let f = spec.fractions;
    if f.iter().any(|&x| !(x > 0.0)) || ((f[0] + f[1] + f[2]) - 1.0).abs() > 1e-9 {
        return Err(Error::config(
            "fractions",
            format!("{f:?} must be positive and sum to 1"),
        ));
    }
    let patients = group_patients(patient_ids, labels)?;
    if patients.len() < 3 {
        return Err(Error::config("cohort", "fewer than 3 patients"));
    }
    let mut b = deal(patients, &f, spec.seed).into_iter();
    Ok(Splits {
        train: b.next().unwrap(),
        val: b.next().unwrap(),
        test: b.next().unwrap(),
    })
}

/// `k` patient-disjoint folds of roughly equal admission counts.
pub fn make_folds(patient_ids: &[u64], labels: &[bool], k: usize, seed: u64) -> Result<FoldPlan> {
    let patients = group_patients(patient_ids, labels)?;
    if k < 3 || k > patients.len() {
        return Err(Error::config(
            "k",
            format!("{k} folds need 3 <= k <= {} patients", patients.len()),
        ));
    }
    Ok(FoldPlan {
        folds: deal(patients, &vec![1.0; k], seed),
    })
}
