//! Cohort construction: filters, temporal fields and 30-day labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::datagen::{Minutes, RawTables, MINUTES_PER_DAY, MINUTES_PER_HOUR};
use crate::error::{Error, Result};
use crate::schema;

/// Sentinel for `days_since_previous` on a patient's first admission.
pub const NO_PREVIOUS_DAYS: f64 = -1.0;

/// Gap (in days) up to which a following admission counts as a
/// readmission. The boundary is inclusive.
pub const READMISSION_WINDOW_DAYS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub patient_id: u64,
    pub admission_id: u64,
    pub admit_time: Minutes,
    pub discharge_time: Minutes,
    pub gender: String,
    pub age: u32,
    pub insurance: String,
    pub language: String,
    pub marital_status: String,
    pub ethnicity: String,
    pub admission_type: String,
    pub admission_location: String,
    pub discharge_location: String,
    pub month_of_admission: u32,
    pub length_of_stay_hours: f64,
    pub days_since_previous: f64,
    pub previous_admission_type: String,
    pub label_readmit_30d: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort {
    /// Ordered by patient id, then admit time.
    pub records: Vec<AdmissionRecord>,
    /// Patient id to record indices, sorted by admit time.
    pub patients: BTreeMap<u64, Vec<usize>>,
}

/// Calendar month (1–12) of a timestamp.
pub fn month_of(t: Minutes) -> u32 {
    let epoch = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let day = epoch + Duration::days(t.div_euclid(1440));
    day.month()
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.label_readmit_30d).collect()
    }

    pub fn admission_ids(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.admission_id).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.records.iter().filter(|r| r.label_readmit_30d).count()
    }

    fn rebuild_index(&mut self) -> Result<()> {
        self.records.sort_by_key(|r| (r.patient_id, r.admit_time, r.admission_id));
        self.patients.clear();
        for (i, r) in self.records.iter().enumerate() {
            let list = self.patients.entry(r.patient_id).or_default();
            if let Some(&prev) = list.last() {
                if self.records[prev].admit_time == r.admit_time {
                    return Err(Error::Integrity(format!(
                        "patient {} has two admissions at the same admit time",
                        r.patient_id
                    )));
                }
            }
            list.push(i);
        }
        Ok(())
    }

    /// Full ingest: filter, derive temporal fields, label.
    pub fn from_tables(tables: &RawTables) -> Result<Cohort> {
        Ok(label_readmissions(derive_temporal(build_cohort(tables)?)))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Cohort> {
        let file_name = path.display().to_string();
        let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(File::open(path)?));
        let mut records = Vec::new();
        for row in rdr.deserialize() {
            let r: AdmissionRecord = row.map_err(|e| Error::Parse {
                file: file_name.clone(),
                line: e.position().map_or(0, csv::Position::line),
                column: 0,
                reason: e.to_string(),
            })?;
            records.push(r);
        }
        let mut c = Cohort {
            records,
            patients: BTreeMap::new(),
        };
        c.rebuild_index()?;
        Ok(c)
    }
}

/// Keeps admissions that have a discharge note and no in-hospital death,
/// joined with patient demographics. Language is collapsed to
/// English/other; age comes from the patient's anchor age.
pub fn build_cohort(tables: &RawTables) -> Result<Cohort> {
    let patients: HashMap<u64, (&str, u32)> = tables
        .patients
        .iter()
        .map(|p| (p.subject_id, (p.gender.as_str(), p.anchor_age)))
        .collect();
    let with_note: HashSet<u64> = tables.discharge_notes.iter().map(|n| n.hadm_id).collect();

    let mut records = Vec::new();
    for a in &tables.admissions {
        let (gender, age) = *patients.get(&a.subject_id).ok_or_else(|| {
            Error::Integrity(format!(
                "admission {} references unknown patient {}",
                a.hadm_id, a.subject_id
            ))
        })?;
        if a.deathtime.is_some() || !with_note.contains(&a.hadm_id) {
            continue;
        }
        if a.dischtime <= a.admittime {
            return Err(Error::Integrity(format!(
                "admission {} ends before it starts",
                a.hadm_id
            )));
        }
        records.push(AdmissionRecord {
            patient_id: a.subject_id,
            admission_id: a.hadm_id,
            admit_time: a.admittime,
            discharge_time: a.dischtime,
            gender: gender.to_string(),
            age,
            insurance: a.insurance.clone(),
            language: schema::collapse_language(&a.language),
            marital_status: a.marital_status.clone(),
            ethnicity: a.ethnicity.clone(),
            admission_type: a.admission_type.clone(),
            admission_location: a.admission_location.clone(),
            discharge_location: a.discharge_location.clone(),
            month_of_admission: month_of(a.admittime),
            length_of_stay_hours: 0.0,
            days_since_previous: NO_PREVIOUS_DAYS,
            previous_admission_type: schema::NO_PREVIOUS_ADMISSION.to_string(),
            label_readmit_30d: false,
        });
    }
    let mut cohort = Cohort {
        records,
        patients: BTreeMap::new(),
    };
    cohort.rebuild_index()?;
    Ok(cohort)
}

pub fn derive_temporal(mut cohort: Cohort) -> Cohort {
    for idx in cohort.patients.values() {
        let mut previous: Option<(Minutes, String)> = None;
        for &i in idx {
            let r = &mut cohort.records[i];
            r.length_of_stay_hours =
                (r.discharge_time - r.admit_time) as f64 / MINUTES_PER_HOUR;
            match &previous {
                Some((prev_discharge, prev_type)) => {
                    r.days_since_previous =
                        ((r.admit_time - prev_discharge) as f64 / MINUTES_PER_DAY).max(0.0);
                    r.previous_admission_type = prev_type.clone();
                }
                None => {
                    r.days_since_previous = NO_PREVIOUS_DAYS;
                    r.previous_admission_type = schema::NO_PREVIOUS_ADMISSION.to_string();
                }
            }
            previous = Some((r.discharge_time, r.admission_type.clone()));
        }
    }
    cohort
}

/// Marks an admission positive when the same patient's next admission
/// starts at most 30 days after its discharge.
pub fn label_readmissions(mut cohort: Cohort) -> Cohort {
    let limit = (READMISSION_WINDOW_DAYS * MINUTES_PER_DAY) as Minutes;
    for idx in cohort.patients.values() {
        for w in idx.windows(2) {
            let gap = cohort.records[w[1]].admit_time - cohort.records[w[0]].discharge_time;
            cohort.records[w[0]].label_readmit_30d = gap <= limit;
        }
        if let Some(&last) = idx.last() {
            cohort.records[last].label_readmit_30d = false;
        }
    }
    cohort
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{AdmissionRow, NoteRow, PatientRow};

    const DAY: i64 = 1440;

    fn admission(subject: u64, hadm: u64, admit: i64, disch: i64) -> AdmissionRow {
        AdmissionRow {
            subject_id: subject,
            hadm_id: hadm,
            admittime: admit,
            dischtime: disch,
            deathtime: None,
            admission_type: "URGENT".into(),
            admission_location: "PACU".into(),
            discharge_location: "HOME".into(),
            insurance: "Other".into(),
            language: "ENGLISH".into(),
            marital_status: "SINGLE".into(),
            ethnicity: "ASIAN".into(),
        }
    }

    fn tables(adms: Vec<AdmissionRow>) -> RawTables {
        let mut subjects: Vec<u64> = adms.iter().map(|a| a.subject_id).collect();
        subjects.dedup();
        RawTables {
            patients: subjects
                .iter()
                .map(|&s| PatientRow {
                    subject_id: s,
                    gender: "F".into(),
                    anchor_age: 50,
                })
                .collect(),
            discharge_notes: adms
                .iter()
                .map(|a| NoteRow {
                    subject_id: a.subject_id,
                    hadm_id: a.hadm_id,
                    note_text: "x".into(),
                })
                .collect(),
            admissions: adms,
            ..Default::default()
        }
    }

    #[test]
    fn length_of_stay_in_hours() {
        // 2000-01-01T00:00 to 2000-01-02T12:00
        let t = tables(vec![admission(1, 1, 0, DAY + 12 * 60)]);
        let c = Cohort::from_tables(&t).unwrap();
        assert_eq!(c.records[0].length_of_stay_hours, 36.0);
        assert_eq!(c.records[0].days_since_previous, NO_PREVIOUS_DAYS);
        assert_eq!(c.records[0].previous_admission_type, "NONE");
        assert_eq!(c.records[0].month_of_admission, 1);
    }

    #[test]
    fn days_since_previous_discharge() {
        // discharge 2000-01-10, next admit 2000-01-20
        let mut second = admission(1, 2, 19 * DAY, 21 * DAY);
        second.admission_type = "ELECTIVE".into();
        let t = tables(vec![admission(1, 1, 5 * DAY, 9 * DAY), second]);
        let c = Cohort::from_tables(&t).unwrap();
        assert_eq!(c.records[1].days_since_previous, 10.0);
        assert_eq!(c.records[1].previous_admission_type, "URGENT");
    }

    #[test]
    fn readmission_boundary_is_inclusive() {
        for (gap_days, expected) in [(10, true), (30, true), (31, false)] {
            let t = tables(vec![
                admission(1, 1, 0, DAY),
                admission(1, 2, DAY + gap_days * DAY, DAY + gap_days * DAY + 60),
            ]);
            let c = Cohort::from_tables(&t).unwrap();
            assert_eq!(c.records[0].label_readmit_30d, expected, "gap {gap_days}");
            assert!(!c.records[1].label_readmit_30d);
        }
    }

    #[test]
    fn deaths_and_noteless_admissions_are_filtered() {
        let mut t = tables(vec![
            admission(1, 1, 0, DAY),
            admission(1, 2, 5 * DAY, 6 * DAY),
            admission(2, 3, 0, DAY),
        ]);
        t.admissions[1].deathtime = Some(6 * DAY);
        t.discharge_notes.retain(|n| n.hadm_id != 3);
        let c = build_cohort(&t).unwrap();
        assert_eq!(c.admission_ids(), vec![1]);
    }

    #[test]
    fn unknown_patient_is_integrity_error() {
        let mut t = tables(vec![admission(1, 1, 0, DAY)]);
        t.patients.clear();
        assert!(matches!(build_cohort(&t), Err(Error::Integrity(_))));
    }

    #[test]
    fn language_is_collapsed() {
        let mut t = tables(vec![admission(1, 1, 0, DAY), admission(2, 2, 0, DAY)]);
        t.admissions[1].language = "SPANISH".into();
        let c = build_cohort(&t).unwrap();
        assert_eq!(c.records[0].language, "ENGLISH");
        assert_eq!(c.records[1].language, "OTHER");
    }

    #[test]
    fn cohort_csv_round_trip() {
        let t = tables(vec![admission(1, 1, 0, DAY), admission(1, 2, 3 * DAY, 4 * DAY)]);
        let c = Cohort::from_tables(&t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cohort.csv");
        c.write_csv(&p).unwrap();
        assert_eq!(Cohort::read_csv(&p).unwrap(), c);
    }
}
