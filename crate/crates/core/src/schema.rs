//! Categorical vocabularies of the admission features.
//!
//! Cardinalities follow the admission feature table (gender 2, admission
//! type 10, admission location 12, discharge location 15, insurance 3,
//! language 2, ethnicity 6, marital status 6, previous admission type 10).
//! The generator draws from these lists and the admission encoder one-hot
//! encodes against them.

pub const GENDERS: [&str; 2] = ["F", "M"];

pub const ADMISSION_TYPES: [&str; 10] = [
    "AMBULATORY OBSERVATION",
    "DIRECT EMER.",
    "DIRECT OBSERVATION",
    "ELECTIVE",
    "EU OBSERVATION",
    "EW EMER.",
    "OBSERVATION ADMIT",
    "SURGICAL SAME DAY ADMISSION",
    "URGENT",
    "TRANSFER ADMIT",
];

pub const ADMISSION_LOCATIONS: [&str; 12] = [
    "AMBULATORY SURGERY TRANSFER",
    "CLINIC REFERRAL",
    "EMERGENCY ROOM",
    "INFORMATION NOT AVAILABLE",
    "INTERNAL TRANSFER TO OR FROM PSYCH",
    "PACU",
    "PHYSICIAN REFERRAL",
    "PROCEDURE SITE",
    "TRANSFER FROM HOSPITAL",
    "TRANSFER FROM SKILLED NURSING FACILITY",
    "WALK-IN/SELF REFERRAL",
    "OTHER",
];

pub const DISCHARGE_LOCATIONS: [&str; 15] = [
    "ACUTE HOSPITAL",
    "AGAINST ADVICE",
    "ASSISTED LIVING",
    "CHRONIC/LONG TERM ACUTE CARE",
    "HEALTHCARE FACILITY",
    "HOME",
    "HOME HEALTH CARE",
    "HOSPICE",
    "OTHER FACILITY",
    "PSYCH FACILITY",
    "REHAB",
    "SKILLED NURSING FACILITY",
    "GROUP HOME",
    "NURSING HOME",
    "RESPITE CARE",
];

pub const INSURANCES: [&str; 3] = ["Medicaid", "Medicare", "Other"];

/// Language is collapsed to English versus anything else.
pub const LANGUAGES: [&str; 2] = ["ENGLISH", "OTHER"];

pub const ETHNICITIES: [&str; 6] = [
    "WHITE",
    "BLACK/AFRICAN AMERICAN",
    "HISPANIC/LATINO",
    "ASIAN",
    "AMERICAN INDIAN/ALASKA NATIVE",
    "OTHER",
];

pub const MARITAL_STATUSES: [&str; 6] = [
    "MARRIED",
    "SINGLE",
    "WIDOWED",
    "DIVORCED",
    "SEPARATED",
    "LIFE PARTNER",
];

/// Previous-admission-type value for a patient's first admission.
pub const NO_PREVIOUS_ADMISSION: &str = "NONE";

/// Collapses a raw language string to the two-valued vocabulary.
/// Empty stays empty (unknown).
pub fn collapse_language(raw: &str) -> String {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        String::new()
    } else if trimmed.eq_ignore_ascii_case("english") {
        LANGUAGES[0].to_string()
    } else {
        LANGUAGES[1].to_string()
    }
}

pub fn lab_item_id(index: usize) -> u32 {
    50_800 + index as u32
}

pub fn diagnosis_code(index: usize) -> (String, u8) {
    let version = if index % 3 == 0 { 9 } else { 10 };
    (format!("D{index:05}"), version)
}

pub fn procedure_code(index: usize) -> (String, u8) {
    let version = if index % 3 == 0 { 9 } else { 10 };
    (format!("P{index:05}"), version)
}
