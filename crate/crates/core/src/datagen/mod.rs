//! Deterministic synthetic generator for EHR-shaped admission tables.
//!
//! Every patient belongs to a latent cluster. Admissions of a cluster share
//! preferred demographic values, diagnosis/procedure code pools, a lab
//! panel with cluster-specific abnormalities and a note vocabulary, each
//! expressed with probability `cluster_signal`. The 30-day readmission of
//! an admission is drawn from a cluster risk that blends the base rate with
//! a bimodal cluster profile in proportion to `homophily_strength`.
//!
//! Readmission is generated, not labelled: a readmitted stay is followed by
//! another admission of the same patient within 30 days, any other stay is
//! followed by a later admission (gap over 30 days) or by nothing.

mod tables;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

pub use tables::*;

use crate::error::{Error, Result};
use crate::schema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_patients: usize,
    pub mean_admissions_per_patient: f64,
    pub readmission_base_rate: f64,
    /// 0 makes labels independent of the latent cluster.
    pub homophily_strength: f64,
    pub n_lab_items: usize,
    pub n_icd_diag: usize,
    pub n_icd_proc: usize,
    pub n_clusters: usize,
    /// Probability that a code, lab item, note token or demographic value
    /// is drawn from the patient's cluster profile rather than at random.
    pub cluster_signal: f64,
    /// Per-modality probability that an admission has no diagnoses,
    /// procedures, lab events or discharge note.
    pub missing_fraction: f64,
    /// Probability that a patient's final admission ends in death.
    pub death_rate: f64,
    /// Scales the mean note length of 10,550 characters.
    pub note_length_scale: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_patients: 1000,
            mean_admissions_per_patient: 2.2,
            readmission_base_rate: 0.171,
            homophily_strength: 0.5,
            n_lab_items: 856,
            n_icd_diag: 2000,
            n_icd_proc: 800,
            n_clusters: 8,
            cluster_signal: 0.6,
            missing_fraction: 0.1,
            death_rate: 0.02,
            note_length_scale: 0.1,
        }
    }
}

const MEAN_NOTE_CHARS: f64 = 10_550.0;
const CHARS_PER_TOKEN: f64 = 6.0;
const MAX_ADMISSIONS_PER_PATIENT: usize = 60;
const SPAN_MINUTES: i64 = 10 * 365 * 24 * 60;
const DIAG_POOL: usize = 30;
const PROC_POOL: usize = 12;
const LAB_PANEL: usize = 30;
const CLUSTER_WORDS: usize = 150;
const COMMON_WORDS: usize = 1500;
const OTHER_LANGUAGES: [&str; 4] = ["SPANISH", "CHINESE", "RUSSIAN", "PORTUGUESE"];

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(field, reason))
            }
        };
        check(self.n_patients > 0, "n_patients", "must be positive")?;
        check(
            self.mean_admissions_per_patient >= 1.0
                && self.mean_admissions_per_patient.is_finite(),
            "mean_admissions_per_patient",
            "must be at least 1",
        )?;
        check(
            self.readmission_base_rate > 0.0 && self.readmission_base_rate < 1.0,
            "readmission_base_rate",
            "must lie in (0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.homophily_strength),
            "homophily_strength",
            "must lie in [0, 1]",
        )?;
        check(self.n_lab_items > 0, "n_lab_items", "must be positive")?;
        check(self.n_icd_diag > 0, "n_icd_diag", "must be positive")?;
        check(self.n_icd_proc > 0, "n_icd_proc", "must be positive")?;
        check(self.n_clusters > 0, "n_clusters", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.cluster_signal),
            "cluster_signal",
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..1.0).contains(&self.missing_fraction),
            "missing_fraction",
            "must lie in [0, 1)",
        )?;
        check(
            (0.0..1.0).contains(&self.death_rate),
            "death_rate",
            "must lie in [0, 1)",
        )?;
        check(
            self.note_length_scale > 0.0 && self.note_length_scale.is_finite(),
            "note_length_scale",
            "must be positive",
        )?;
        let max_risk = self.cluster_risks().into_iter().fold(0.0, f64::max);
        check(
            max_risk <= self.continue_probability(),
            "readmission_base_rate",
            "cluster readmission risk exceeds what mean_admissions_per_patient allows",
        )
    }

    /// Probability that a stay is followed by another admission.
    fn continue_probability(&self) -> f64 {
        1.0 - 1.0 / self.mean_admissions_per_patient
    }

    /// Per-cluster 30-day readmission probability. The cluster mean equals
    /// the base rate for every homophily strength.
    pub fn cluster_risks(&self) -> Vec<f64> {
        let k = self.n_clusters.max(1);
        let base = self.readmission_base_rate;
        let n_high = ((0.4 * k as f64).round() as usize).clamp(1, k);
        let low = 0.1 * base;
        let high = (base * k as f64 - low * (k - n_high) as f64) / n_high as f64;
        (0..k)
            .map(|c| {
                let profile = if c < n_high { high } else { low };
                (1.0 - self.homophily_strength) * base + self.homophily_strength * profile
            })
            .collect()
    }
}

/// Latent ground truth kept alongside the generated tables.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTruth {
    /// `(subject_id, cluster)` in patient order.
    pub patient_cluster: Vec<(u64, usize)>,
    pub cluster_risk: Vec<f64>,
}

struct ClusterProfile {
    diag_pool: Vec<usize>,
    proc_pool: Vec<usize>,
    lab_panel: Vec<usize>,
    abnormal: Vec<bool>,
    words: Vec<String>,
    gender: usize,
    insurance: usize,
    language_english: bool,
    ethnicity: usize,
    marital: usize,
    admission_type: usize,
    admission_location: usize,
    discharge_location: usize,
    age_mean: f64,
    los_log_mean: f64,
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vi", "so", "pe", "du", "ga", "hi", "zo", "be", "fu", "xi",
];

/// Deterministic pseudo-word for an index.
pub fn pseudo_word(mut index: usize) -> String {
    let mut w = String::new();
    loop {
        w.push_str(SYLLABLES[index % SYLLABLES.len()]);
        index /= SYLLABLES.len();
        if index == 0 {
            break;
        }
    }
    w
}

fn code_title(kind: &str, index: usize) -> String {
    let base = if kind == "disorder" { 1_000_000 } else { 2_000_000 };
    let words: Vec<String> = (0..3).map(|k| pseudo_word(base + index * 7 + k * 131_071)).collect();
    format!("{kind} {}", words.join(" "))
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, signal: f64, preferred: T, any: impl FnOnce(&mut ChaCha8Rng) -> T) -> T {
    if rng.gen::<f64>() < signal {
        preferred
    } else {
        any(rng)
    }
}

fn build_profiles(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<ClusterProfile> {
    (0..cfg.n_clusters)
        .map(|c| {
            let diag_pool = sample(rng, cfg.n_icd_diag, DIAG_POOL.min(cfg.n_icd_diag)).into_vec();
            let proc_pool = sample(rng, cfg.n_icd_proc, PROC_POOL.min(cfg.n_icd_proc)).into_vec();
            let lab_panel = sample(rng, cfg.n_lab_items, LAB_PANEL.min(cfg.n_lab_items)).into_vec();
            let mut abnormal = vec![false; cfg.n_lab_items];
            for &item in lab_panel.iter().step_by(2) {
                abnormal[item] = true;
            }
            let words = (0..CLUSTER_WORDS)
                .map(|i| pseudo_word(100_000 + c * 1_000 + i))
                .collect();
            ClusterProfile {
                diag_pool,
                proc_pool,
                lab_panel,
                abnormal,
                words,
                gender: rng.gen_range(0..schema::GENDERS.len()),
                insurance: rng.gen_range(0..schema::INSURANCES.len()),
                language_english: rng.gen::<f64>() < 0.8,
                ethnicity: rng.gen_range(0..schema::ETHNICITIES.len()),
                marital: rng.gen_range(0..schema::MARITAL_STATUSES.len()),
                admission_type: rng.gen_range(0..schema::ADMISSION_TYPES.len()),
                admission_location: rng.gen_range(0..schema::ADMISSION_LOCATIONS.len()),
                discharge_location: rng.gen_range(0..schema::DISCHARGE_LOCATIONS.len()),
                age_mean: rng.gen_range(35.0..80.0),
                los_log_mean: rng.gen_range(3.9..4.7),
            }
        })
        .collect()
}

pub fn generate(config: &GenConfig) -> Result<RawTables> {
    generate_with_truth(config).map(|(t, _)| t)
}

pub fn generate_with_truth(config: &GenConfig) -> Result<(RawTables, LatentTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let profiles = build_profiles(config, &mut rng);
    let risks = config.cluster_risks();
    let cont = config.continue_probability();
    let signal = config.cluster_signal;
    let common_words: Vec<String> = (0..COMMON_WORDS).map(pseudo_word).collect();

    let diag_count = Poisson::new(11.5).expect("positive rate");
    let proc_count = Poisson::new(1.9).expect("positive rate");
    let lab_items = Poisson::new(15.0).expect("positive rate");
    let lab_repeats = Poisson::new(1.5).expect("positive rate");
    let mean_tokens = MEAN_NOTE_CHARS * config.note_length_scale / CHARS_PER_TOKEN;
    let note_tokens = Normal::new(mean_tokens, 0.25 * mean_tokens).expect("finite");

    let mut tables = RawTables::default();
    let mut truth = LatentTruth {
        patient_cluster: Vec::with_capacity(config.n_patients),
        cluster_risk: risks.clone(),
    };
    let mut next_hadm: u64 = 20_000_000;

    for p in 0..config.n_patients {
        let subject_id = 10_000_000 + p as u64;
        let cluster = rng.gen_range(0..config.n_clusters);
        let prof = &profiles[cluster];
        truth.patient_cluster.push((subject_id, cluster));

        let gender = pick(&mut rng, signal, prof.gender, |r| r.gen_range(0..2));
        let age_draw = Normal::new(prof.age_mean, 12.0).expect("finite").sample(&mut rng);
        tables.patients.push(PatientRow {
            subject_id,
            gender: schema::GENDERS[gender].to_string(),
            anchor_age: age_draw.round().clamp(18.0, 91.0) as u32,
        });

        let insurance = pick(&mut rng, signal, prof.insurance, |r| r.gen_range(0..3));
        let english = pick(&mut rng, signal, prof.language_english, |r| r.gen::<f64>() < 0.85);
        let language = if rng.gen::<f64>() < 0.01 {
            String::new()
        } else if english {
            "ENGLISH".to_string()
        } else {
            OTHER_LANGUAGES[rng.gen_range(0..OTHER_LANGUAGES.len())].to_string()
        };
        let ethnicity = pick(&mut rng, signal, prof.ethnicity, |r| {
            r.gen_range(0..schema::ETHNICITIES.len())
        });
        let marital = if rng.gen::<f64>() < 0.02 {
            String::new()
        } else {
            let m = pick(&mut rng, signal, prof.marital, |r| {
                r.gen_range(0..schema::MARITAL_STATUSES.len())
            });
            schema::MARITAL_STATUSES[m].to_string()
        };

        let risk = risks[cluster];
        // later admissions beyond 30 days keep the expected chain length at
        // the configured mean for every cluster
        let later = ((cont - risk) / (1.0 - risk)).clamp(0.0, 1.0);
        let los = LogNormal::new(prof.los_log_mean, 0.8).expect("finite");

        let mut admit = rng.gen_range(0..SPAN_MINUTES);
        for k in 0..MAX_ADMISSIONS_PER_PATIENT {
            let hadm_id = next_hadm;
            next_hadm += 1;
            let stay_minutes = ((los.sample(&mut rng) * 60.0).round() as i64).max(60);
            let disch = admit + stay_minutes;

            let readmit = rng.gen::<f64>() < risk;
            let follow = readmit || rng.gen::<f64>() < later;
            let last = !follow || k + 1 == MAX_ADMISSIONS_PER_PATIENT;
            let deathtime = (last && rng.gen::<f64>() < config.death_rate).then_some(disch);

            let admission_type = pick(&mut rng, signal, prof.admission_type, |r| {
                r.gen_range(0..schema::ADMISSION_TYPES.len())
            });
            let admission_location = pick(&mut rng, signal, prof.admission_location, |r| {
                r.gen_range(0..schema::ADMISSION_LOCATIONS.len())
            });
            let discharge_location = if rng.gen::<f64>() < 0.01 {
                String::new()
            } else {
                let d = pick(&mut rng, signal, prof.discharge_location, |r| {
                    r.gen_range(0..schema::DISCHARGE_LOCATIONS.len())
                });
                schema::DISCHARGE_LOCATIONS[d].to_string()
            };
            tables.admissions.push(AdmissionRow {
                subject_id,
                hadm_id,
                admittime: admit,
                dischtime: disch,
                deathtime,
                admission_type: schema::ADMISSION_TYPES[admission_type].to_string(),
                admission_location: schema::ADMISSION_LOCATIONS[admission_location].to_string(),
                discharge_location,
                insurance: schema::INSURANCES[insurance].to_string(),
                language: language.clone(),
                marital_status: marital.clone(),
                ethnicity: schema::ETHNICITIES[ethnicity].to_string(),
            });

            if rng.gen::<f64>() >= config.missing_fraction {
                let n = 1 + diag_count.sample(&mut rng) as usize;
                let codes = draw_codes(&mut rng, n, signal, &prof.diag_pool, config.n_icd_diag);
                for (i, c) in codes.into_iter().enumerate() {
                    let (icd_code, icd_version) = schema::diagnosis_code(c);
                    tables.diagnoses_icd.push(CodeRow {
                        subject_id,
                        hadm_id,
                        seq_num: i as u32 + 1,
                        icd_code,
                        icd_version,
                    });
                }
            }
            if rng.gen::<f64>() >= config.missing_fraction {
                let n = 1 + proc_count.sample(&mut rng) as usize;
                let codes = draw_codes(&mut rng, n, signal, &prof.proc_pool, config.n_icd_proc);
                for (i, c) in codes.into_iter().enumerate() {
                    let (icd_code, icd_version) = schema::procedure_code(c);
                    tables.procedures_icd.push(CodeRow {
                        subject_id,
                        hadm_id,
                        seq_num: i as u32 + 1,
                        icd_code,
                        icd_version,
                    });
                }
            }
            if rng.gen::<f64>() >= config.missing_fraction {
                let n = 5 + lab_items.sample(&mut rng) as usize;
                let items = draw_codes(&mut rng, n, signal, &prof.lab_panel, config.n_lab_items);
                for item in items {
                    let p_abnormal = if prof.abnormal[item] { 0.7 } else { 0.1 };
                    let repeats = 1 + lab_repeats.sample(&mut rng) as usize;
                    for _ in 0..repeats {
                        let flag = if rng.gen::<f64>() < p_abnormal {
                            LabFlag::Abnormal
                        } else {
                            LabFlag::Normal
                        };
                        tables.labevents.push(LabEventRow {
                            subject_id,
                            hadm_id,
                            itemid: schema::lab_item_id(item),
                            charttime: rng.gen_range(admit..disch),
                            flag,
                        });
                    }
                }
            }
            if rng.gen::<f64>() >= config.missing_fraction {
                let n = note_tokens.sample(&mut rng).round().max(1.0) as usize;
                let mut text = String::with_capacity(n * CHARS_PER_TOKEN as usize);
                for t in 0..n {
                    if t > 0 {
                        text.push(' ');
                    }
                    let word = if rng.gen::<f64>() < signal {
                        &prof.words[rng.gen_range(0..prof.words.len())]
                    } else {
                        &common_words[rng.gen_range(0..common_words.len())]
                    };
                    text.push_str(word);
                }
                tables.discharge_notes.push(NoteRow {
                    subject_id,
                    hadm_id,
                    note_text: text,
                });
            }

            if last {
                break;
            }
            let gap_days = if readmit {
                rng.gen_range(0.5..30.0)
            } else {
                30.0 + 1.0 / 1440.0 + rand_distr::Exp::new(1.0 / 150.0).expect("rate").sample(&mut rng)
            };
            admit = disch + (gap_days * MINUTES_PER_DAY).ceil() as i64;
        }
    }

    for c in 0..config.n_icd_diag {
        let (icd_code, icd_version) = schema::diagnosis_code(c);
        tables.code_text_map.push(CodeTitleRow {
            icd_code,
            icd_version,
            long_title: code_title("disorder", c),
        });
    }
    for c in 0..config.n_icd_proc {
        let (icd_code, icd_version) = schema::procedure_code(c);
        tables.code_text_map.push(CodeTitleRow {
            icd_code,
            icd_version,
            long_title: code_title("procedure", c),
        });
    }
    Ok((tables, truth))
}

/// Draws `n` distinct indices, each from the cluster pool with probability
/// `signal`, otherwise from the whole vocabulary.
fn draw_codes(rng: &mut ChaCha8Rng, n: usize, signal: f64, pool: &[usize], vocab: usize) -> Vec<usize> {
    let n = n.min(vocab);
    let mut out: Vec<usize> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < n * 20 {
        attempts += 1;
        let c = if rng.gen::<f64>() < signal && !pool.is_empty() {
            pool[rng.gen_range(0..pool.len())]
        } else {
            rng.gen_range(0..vocab)
        };
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}
