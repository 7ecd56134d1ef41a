use std::collections::{HashMap, HashSet};

use caregraph::datagen::{generate, generate_with_truth, read_tables, write_tables, GenConfig, RawTables};
use caregraph::ingest::{build_cohort, Cohort};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn small(seed: u64, n_patients: usize) -> GenConfig {
    GenConfig {
        seed,
        n_patients,
        n_lab_items: 24,
        n_icd_diag: 80,
        n_icd_proc: 30,
        note_length_scale: 0.01,
        ..GenConfig::default()
    }
}

/// Pearson chi-square p-value of admission labels against patient cluster.
fn label_cluster_p(config: &GenConfig) -> f64 {
    let (tables, truth) = generate_with_truth(config).unwrap();
    let cluster: HashMap<u64, usize> = truth.patient_cluster.iter().copied().collect();
    let cohort = Cohort::from_tables(&tables).unwrap();
    let k = config.n_clusters;
    let mut counts = vec![[0.0f64; 2]; k];
    for r in &cohort.records {
        counts[cluster[&r.patient_id]][r.label_readmit_30d as usize] += 1.0;
    }
    let n: f64 = counts.iter().map(|c| c[0] + c[1]).sum();
    let col = [0, 1].map(|j| counts.iter().map(|c| c[j]).sum::<f64>());
    let mut stat = 0.0;
    for c in &counts {
        let row = c[0] + c[1];
        for j in 0..2 {
            let e = row * col[j] / n;
            stat += (c[j] - e).powi(2) / e;
        }
    }
    let df = ((k - 1) * 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

#[test]
fn no_homophily_means_no_label_cluster_association() {
    let p = label_cluster_p(&GenConfig {
        homophily_strength: 0.0,
        ..small(17, 10_000)
    });
    assert!(p > 0.01, "p = {p}");
    // positive control: the same test detects planted homophily
    let p = label_cluster_p(&GenConfig {
        homophily_strength: 0.9,
        ..small(17, 10_000)
    });
    assert!(p < 1e-6, "p = {p}");
}

#[test]
fn admission_count_tracks_configured_mean() {
    for mean in [1.5, 2.2, 4.0] {
        let t = generate(&GenConfig {
            mean_admissions_per_patient: mean,
            ..small(3, 5000)
        })
        .unwrap();
        let observed = t.admissions.len() as f64 / t.patients.len() as f64;
        assert!((observed / mean - 1.0).abs() <= 0.10, "mean {mean}: observed {observed}");
    }
}

#[test]
fn positive_rate_tracks_base_rate() {
    for (seed, base, h) in [(1, 0.171, 0.5), (2, 0.1, 0.9), (3, 0.25, 0.0), (4, 0.171, 1.0)] {
        let t = generate(&GenConfig {
            readmission_base_rate: base,
            homophily_strength: h,
            ..small(seed, 2000)
        })
        .unwrap();
        let c = Cohort::from_tables(&t).unwrap();
        let rate = c.positive_count() as f64 / c.len() as f64;
        assert!((rate / base - 1.0).abs() <= 0.20, "base {base} h {h}: rate {rate}");
    }
}

/// Positive iff some later admission of the same patient in the cohort
/// starts within 30 days of discharge.
fn oracle_labels(c: &Cohort) -> Vec<bool> {
    let limit = 30 * 1440;
    c.records
        .iter()
        .map(|r| {
            c.records.iter().any(|s| {
                s.patient_id == r.patient_id
                    && (s.admit_time, s.admission_id) > (r.admit_time, r.admission_id)
                    && s.admit_time - r.discharge_time <= limit
            })
        })
        .collect()
}

#[test]
fn labels_match_brute_force() {
    let t = generate(&small(5, 400)).unwrap();
    let c = Cohort::from_tables(&t).unwrap();
    assert!(c.positive_count() > 0);
    assert_eq!(c.labels(), oracle_labels(&c));
}

#[test]
fn cohort_excludes_exactly_deaths_and_noteless_admissions() {
    let t = generate(&GenConfig {
        death_rate: 0.2,
        missing_fraction: 0.3,
        ..small(9, 800)
    })
    .unwrap();
    let all: HashSet<u64> = t.admissions.iter().map(|a| a.hadm_id).collect();
    let died: HashSet<u64> = t.admissions.iter().filter(|a| a.deathtime.is_some()).map(|a| a.hadm_id).collect();
    let noted: HashSet<u64> = t.discharge_notes.iter().map(|n| n.hadm_id).collect();
    let expected: HashSet<u64> = all.iter().filter(|h| !died.contains(h) && noted.contains(h)).copied().collect();
    let kept: HashSet<u64> = build_cohort(&t).unwrap().admission_ids().into_iter().collect();
    assert!(!died.is_empty() && noted.len() < all.len());
    assert_eq!(kept, expected);
}

#[test]
fn tables_survive_disk_round_trip() {
    let t = generate(&small(8, 60)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_tables(&t, dir.path()).unwrap();
    assert_eq!(read_tables(dir.path()).unwrap(), t);
}

fn shuffle<T>(v: &mut [T], seed: u64) {
    let mut g = caregraph::hashing::SplitMix64::new(seed);
    for i in (1..v.len()).rev() {
        let j = (g.next_u64() % (i as u64 + 1)) as usize;
        v.swap(i, j);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_tables_keep_referential_integrity(
        seed in any::<u64>(),
        n in 1usize..80,
        mean in 1.8f64..4.0,
        missing in 0.0f64..0.9,
        h in 0.0f64..=1.0,
    ) {
        let t = generate(&GenConfig {
            mean_admissions_per_patient: mean,
            missing_fraction: missing,
            homophily_strength: h,
            ..small(seed, n)
        }).unwrap();
        prop_assert!(t.validate().is_ok());
        let subjects: HashSet<u64> = t.patients.iter().map(|p| p.subject_id).collect();
        let owner: HashMap<u64, u64> = t.admissions.iter().map(|a| (a.hadm_id, a.subject_id)).collect();
        prop_assert_eq!(owner.len(), t.admissions.len());
        prop_assert!(t.admissions.iter().all(|a| subjects.contains(&a.subject_id) && a.dischtime > a.admittime));
        let codes = t.diagnoses_icd.iter().chain(&t.procedures_icd).map(|r| (r.hadm_id, r.subject_id));
        let labs = t.labevents.iter().map(|r| (r.hadm_id, r.subject_id));
        let notes = t.discharge_notes.iter().map(|r| (r.hadm_id, r.subject_id));
        for (hadm, subject) in codes.chain(labs).chain(notes) {
            prop_assert_eq!(owner.get(&hadm), Some(&subject));
        }
    }

    #[test]
    fn cohort_ignores_input_row_order(seed in any::<u64>(), n in 2usize..40) {
        let t = generate(&small(seed, n)).unwrap();
        let mut shuffled: RawTables = t.clone();
        shuffle(&mut shuffled.admissions, seed);
        shuffle(&mut shuffled.patients, seed ^ 1);
        shuffle(&mut shuffled.discharge_notes, seed ^ 2);
        prop_assert_eq!(Cohort::from_tables(&shuffled).unwrap(), Cohort::from_tables(&t).unwrap());
    }
}
