//! Raw table rows and their CSV encoding.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes since 2000-01-01T00:00.
pub type Minutes = i64;

pub const MINUTES_PER_HOUR: f64 = 60.0;
pub const MINUTES_PER_DAY: f64 = 1440.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRow {
    pub subject_id: u64,
    pub hadm_id: u64,
    pub admittime: Minutes,
    pub dischtime: Minutes,
    pub deathtime: Option<Minutes>,
    pub admission_type: String,
    pub admission_location: String,
    pub discharge_location: String,
    pub insurance: String,
    pub language: String,
    pub marital_status: String,
    pub ethnicity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRow {
    pub subject_id: u64,
    pub gender: String,
    pub anchor_age: u32,
}

/// One row of `diagnoses_icd.csv` or `procedures_icd.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRow {
    pub subject_id: u64,
    pub hadm_id: u64,
    pub seq_num: u32,
    pub icd_code: String,
    pub icd_version: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabFlag {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabEventRow {
    pub subject_id: u64,
    pub hadm_id: u64,
    pub itemid: u32,
    pub charttime: Minutes,
    pub flag: LabFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteRow {
    pub subject_id: u64,
    pub hadm_id: u64,
    pub note_text: String,
}

/// Row of `code_text_map.csv`: the text description of an ICD code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeTitleRow {
    pub icd_code: String,
    pub icd_version: u8,
    pub long_title: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTables {
    pub admissions: Vec<AdmissionRow>,
    pub patients: Vec<PatientRow>,
    pub diagnoses_icd: Vec<CodeRow>,
    pub procedures_icd: Vec<CodeRow>,
    pub labevents: Vec<LabEventRow>,
    pub discharge_notes: Vec<NoteRow>,
    /// Text for every ICD code the generator can emit.
    pub code_text_map: Vec<CodeTitleRow>,
}

pub const ADMISSIONS_FILE: &str = "admissions.csv";
pub const PATIENTS_FILE: &str = "patients.csv";
pub const DIAGNOSES_FILE: &str = "diagnoses_icd.csv";
pub const PROCEDURES_FILE: &str = "procedures_icd.csv";
pub const LABEVENTS_FILE: &str = "labevents.csv";
pub const NOTES_FILE: &str = "discharge_notes.csv";
pub const CODE_TEXT_FILE: &str = "code_text_map.csv";

const ADMISSION_COLUMNS: &[&str] = &[
    "subject_id",
    "hadm_id",
    "admittime",
    "dischtime",
    "deathtime",
    "admission_type",
    "admission_location",
    "discharge_location",
    "insurance",
    "language",
    "marital_status",
    "ethnicity",
];
const PATIENT_COLUMNS: &[&str] = &["subject_id", "gender", "anchor_age"];
const CODE_COLUMNS: &[&str] = &["subject_id", "hadm_id", "seq_num", "icd_code", "icd_version"];
const LAB_COLUMNS: &[&str] = &["subject_id", "hadm_id", "itemid", "charttime", "flag"];
const NOTE_COLUMNS: &[&str] = &["subject_id", "hadm_id", "note_text"];
const CODE_TEXT_COLUMNS: &[&str] = &["icd_code", "icd_version", "long_title"];

fn write_csv<T: Serialize>(dir: &Path, file: &str, columns: &[&str], rows: &[T]) -> Result<()> {
    let path = dir.join(file);
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(&path)?));
    w.write_record(columns).map_err(|e| csv_io(e, file))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_io(e, file))?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error, file: &str) -> Error {
    let (line, column) = match e.kind() {
        csv::ErrorKind::Deserialize { pos, err } => (
            pos.as_ref().map_or(0, csv::Position::line),
            err.field().map_or(0, |f| f + 1),
        ),
        csv::ErrorKind::UnequalLengths { pos, .. } => {
            (pos.as_ref().map_or(0, csv::Position::line), 0)
        }
        _ => (e.position().map_or(0, csv::Position::line), 0),
    };
    let reason = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.kind().to_string(),
        _ => e.to_string(),
    };
    Error::Parse {
        file: file.to_string(),
        line,
        column,
        reason,
    }
}

fn read_csv<T: DeserializeOwned>(dir: &Path, file: &str, columns: &[&str]) -> Result<Vec<T>> {
    let path = dir.join(file);
    let handle = File::open(&path).map_err(|e| Error::Parse {
        file: file.to_string(),
        line: 0,
        column: 0,
        reason: format!("cannot open: {e}"),
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::BufReader::new(handle));
    let header = rdr.headers().map_err(|e| csv_io(e, file))?.clone();
    for (i, name) in header.iter().enumerate() {
        if !columns.contains(&name) {
            return Err(Error::Parse {
                file: file.to_string(),
                line: 1,
                column: i as u64 + 1,
                reason: format!("unknown column `{name}`"),
            });
        }
    }
    if let Some(missing) = columns.iter().find(|c| !header.iter().any(|h| h == **c)) {
        return Err(Error::Parse {
            file: file.to_string(),
            line: 1,
            column: 0,
            reason: format!("missing column `{missing}`"),
        });
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| csv_io(e, file)))
        .collect()
}

impl RawTables {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(dir, ADMISSIONS_FILE, ADMISSION_COLUMNS, &self.admissions)?;
        write_csv(dir, PATIENTS_FILE, PATIENT_COLUMNS, &self.patients)?;
        write_csv(dir, DIAGNOSES_FILE, CODE_COLUMNS, &self.diagnoses_icd)?;
        write_csv(dir, PROCEDURES_FILE, CODE_COLUMNS, &self.procedures_icd)?;
        write_csv(dir, LABEVENTS_FILE, LAB_COLUMNS, &self.labevents)?;
        write_csv(dir, NOTES_FILE, NOTE_COLUMNS, &self.discharge_notes)?;
        write_csv(dir, CODE_TEXT_FILE, CODE_TEXT_COLUMNS, &self.code_text_map)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<RawTables> {
        Ok(RawTables {
            admissions: read_csv(dir, ADMISSIONS_FILE, ADMISSION_COLUMNS)?,
            patients: read_csv(dir, PATIENTS_FILE, PATIENT_COLUMNS)?,
            diagnoses_icd: read_csv(dir, DIAGNOSES_FILE, CODE_COLUMNS)?,
            procedures_icd: read_csv(dir, PROCEDURES_FILE, CODE_COLUMNS)?,
            labevents: read_csv(dir, LABEVENTS_FILE, LAB_COLUMNS)?,
            discharge_notes: read_csv(dir, NOTES_FILE, NOTE_COLUMNS)?,
            code_text_map: read_csv(dir, CODE_TEXT_FILE, CODE_TEXT_COLUMNS)?,
        })
    }

    /// Checks referential integrity and admission time ordering.
    pub fn validate(&self) -> Result<()> {
        use std::collections::HashSet;
        let patients: HashSet<u64> = self.patients.iter().map(|p| p.subject_id).collect();
        let mut admissions = HashSet::with_capacity(self.admissions.len());
        for a in &self.admissions {
            if a.admittime >= a.dischtime {
                return Err(Error::Integrity(format!(
                    "admission {} has admittime {} >= dischtime {}",
                    a.hadm_id, a.admittime, a.dischtime
                )));
            }
            if !patients.contains(&a.subject_id) {
                return Err(Error::Integrity(format!(
                    "admission {} references unknown patient {}",
                    a.hadm_id, a.subject_id
                )));
            }
            if !admissions.insert(a.hadm_id) {
                return Err(Error::Integrity(format!("duplicate admission id {}", a.hadm_id)));
            }
        }
        let child_ids = self
            .diagnoses_icd
            .iter()
            .chain(&self.procedures_icd)
            .map(|r| r.hadm_id)
            .chain(self.labevents.iter().map(|r| r.hadm_id))
            .chain(self.discharge_notes.iter().map(|r| r.hadm_id));
        for id in child_ids {
            if !admissions.contains(&id) {
                return Err(Error::Integrity(format!(
                    "child row references unknown admission {id}"
                )));
            }
        }
        Ok(())
    }
}

pub fn write_tables(tables: &RawTables, dir: &Path) -> Result<()> {
    tables.write(dir)
}

pub fn read_tables(dir: &Path) -> Result<RawTables> {
    RawTables::read(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RawTables {
        RawTables {
            admissions: vec![AdmissionRow {
                subject_id: 1,
                hadm_id: 10,
                admittime: 0,
                dischtime: 2160,
                deathtime: None,
                admission_type: "URGENT".into(),
                admission_location: "PACU".into(),
                discharge_location: "".into(),
                insurance: "Other".into(),
                language: "ENGLISH".into(),
                marital_status: "SINGLE".into(),
                ethnicity: "ASIAN".into(),
            }],
            patients: vec![PatientRow {
                subject_id: 1,
                gender: "F".into(),
                anchor_age: 40,
            }],
            discharge_notes: vec![NoteRow {
                subject_id: 1,
                hadm_id: 10,
                note_text: "line one, \"quoted\"\nline two".into(),
            }],
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_with_quoting_and_empty_tables() {
        let dir = tempfile::tempdir().unwrap();
        let t = tiny();
        t.write(dir.path()).unwrap();
        assert_eq!(RawTables::read(dir.path()).unwrap(), t);
    }

    #[test]
    fn missing_file_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        tiny().write(dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(ADMISSIONS_FILE)).unwrap();
        match RawTables::read(dir.path()) {
            Err(Error::Parse { file, .. }) => assert_eq!(file, ADMISSIONS_FILE),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_header_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        tiny().write(dir.path()).unwrap();
        std::fs::write(
            dir.path().join(PATIENTS_FILE),
            "subject_id,gender,anchor_age,shoe_size\n1,F,40,9\n",
        )
        .unwrap();
        let err = RawTables::read(dir.path()).unwrap_err();
        match err {
            Error::Parse {
                file,
                line,
                column,
                reason,
            } => {
                assert_eq!(file, PATIENTS_FILE);
                assert_eq!((line, column), (1, 4));
                assert!(reason.contains("shoe_size"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_value_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        tiny().write(dir.path()).unwrap();
        std::fs::write(
            dir.path().join(PATIENTS_FILE),
            "subject_id,gender,anchor_age\n1,F,40\n2,M,old\n",
        )
        .unwrap();
        match RawTables::read(dir.path()).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_orphans_and_inverted_stays() {
        let mut t = tiny();
        t.validate().unwrap();
        t.labevents.push(LabEventRow {
            subject_id: 1,
            hadm_id: 99,
            itemid: 50800,
            charttime: 5,
            flag: LabFlag::Normal,
        });
        assert!(matches!(t.validate(), Err(Error::Integrity(_))));
        let mut t = tiny();
        t.admissions[0].dischtime = 0;
        assert!(matches!(t.validate(), Err(Error::Integrity(_))));
    }
}
