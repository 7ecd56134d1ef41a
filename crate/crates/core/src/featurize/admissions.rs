//! One-hot / numeric encoding of the admission record.
//!
//! Column order: `age`, `month_of_admission`, `length_of_stay_hours`,
//! `days_since_previous`, then one-hot groups for gender, admission type,
//! admission location, discharge location, insurance, language, ethnicity,
//! marital status and previous admission type. Every group except gender
//! and previous admission type carries a trailing `UNKNOWN` slot taken by
//! empty values; previous admission type carries `NONE` for first stays.
//! The total width is 78.

use crate::error::{Error, Result};
use crate::ingest::AdmissionRecord;
use crate::matrix::Matrix;
use crate::par;
use crate::schema::{self, NO_PREVIOUS_ADMISSION};

pub const ADMISSIONS_WIDTH: usize = 78;
pub const NUMERIC_COLUMNS: [&str; 4] = [
    "age",
    "month_of_admission",
    "length_of_stay_hours",
    "days_since_previous",
];
const UNKNOWN: &str = "UNKNOWN";

struct Group {
    name: &'static str,
    values: &'static [&'static str],
    trailing: Option<&'static str>,
    get: fn(&AdmissionRecord) -> &str,
}

const GROUPS: [Group; 9] = [
    Group {
        name: "gender",
        values: &schema::GENDERS,
        trailing: None,
        get: |r| &r.gender,
    },
    Group {
        name: "admission_type",
        values: &schema::ADMISSION_TYPES,
        trailing: Some(UNKNOWN),
        get: |r| &r.admission_type,
    },
    Group {
        name: "admission_location",
        values: &schema::ADMISSION_LOCATIONS,
        trailing: Some(UNKNOWN),
        get: |r| &r.admission_location,
    },
    Group {
        name: "discharge_location",
        values: &schema::DISCHARGE_LOCATIONS,
        trailing: Some(UNKNOWN),
        get: |r| &r.discharge_location,
    },
    Group {
        name: "insurance",
        values: &schema::INSURANCES,
        trailing: Some(UNKNOWN),
        get: |r| &r.insurance,
    },
    Group {
        name: "language",
        values: &schema::LANGUAGES,
        trailing: Some(UNKNOWN),
        get: |r| &r.language,
    },
    Group {
        name: "ethnicity",
        values: &schema::ETHNICITIES,
        trailing: Some(UNKNOWN),
        get: |r| &r.ethnicity,
    },
    Group {
        name: "marital_status",
        values: &schema::MARITAL_STATUSES,
        trailing: Some(UNKNOWN),
        get: |r| &r.marital_status,
    },
    Group {
        name: "previous_admission_type",
        values: &schema::ADMISSION_TYPES,
        trailing: Some(NO_PREVIOUS_ADMISSION),
        get: |r| &r.previous_admission_type,
    },
];

pub fn admission_column_names() -> Vec<String> {
    let mut names: Vec<String> = NUMERIC_COLUMNS.iter().map(|s| s.to_string()).collect();
    for g in &GROUPS {
        for v in g.values.iter().chain(g.trailing.iter()) {
            names.push(format!("{}={}", g.name, v));
        }
    }
    names
}

fn encode_row(r: &AdmissionRecord, out: &mut [f64]) -> Result<()> {
    out[0] = r.age as f64;
    out[1] = r.month_of_admission as f64;
    out[2] = r.length_of_stay_hours;
    out[3] = r.days_since_previous;
    let mut offset = NUMERIC_COLUMNS.len();
    for g in &GROUPS {
        let value = (g.get)(r);
        let slot = match g.values.iter().position(|v| *v == value) {
            Some(i) => i,
            None => match g.trailing {
                Some(UNKNOWN) if value.is_empty() => g.values.len(),
                Some(t) if t == value => g.values.len(),
                _ => {
                    return Err(Error::Encoding {
                        column: g.name.to_string(),
                        value: value.to_string(),
                    })
                }
            },
        };
        out[offset + slot] = 1.0;
        offset += g.values.len() + usize::from(g.trailing.is_some());
    }
    debug_assert_eq!(offset, ADMISSIONS_WIDTH);
    Ok(())
}

pub fn encode_admissions(records: &[AdmissionRecord]) -> Result<Matrix> {
    let rows: Vec<Result<Vec<f64>>> = par::map_slice(records, |r| {
        let mut row = vec![0.0; ADMISSIONS_WIDTH];
        encode_row(r, &mut row).map(|_| row)
    });
    let mut data = Vec::with_capacity(records.len() * ADMISSIONS_WIDTH);
    for row in rows {
        data.extend(row?);
    }
    Matrix::from_vec(records.len(), ADMISSIONS_WIDTH, data)
}
