use serde::{Deserialize, Serialize};

use crate::model::ModelError;

/// Feature order shared by training, packing and the CSV header.
pub const FEATURE_NAMES: [&str; 7] = ["age", "sex", "bmi", "children", "smoker", "region", "charges"];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

pub type FeatureVector = [f64; FEATURE_COUNT];

/// Region codes, indexed by their numeric encoding.
pub const REGIONS: [&str; 4] = ["southwest", "southeast", "northwest", "northeast"];

/// One patient claim as entered at the hospital.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub age: u32,
    /// 0 female, 1 male.
    pub sex: u8,
    pub bmi: f64,
    pub children: u32,
    /// 0 no, 1 yes.
    pub smoker: u8,
    /// Index into [`REGIONS`].
    pub region: u8,
    pub charges: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_id: Option<String>,
    /// Carried along untouched; never enters the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_id: Option<String>,
}

impl RawRecord {
    pub fn new(age: u32, sex: u8, bmi: f64, children: u32, smoker: u8, region: u8, charges: f64) -> Self {
        Self {
            age,
            sex,
            bmi,
            children,
            smoker,
            region,
            charges,
            claim_id: None,
            policy_id: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let violation = |msg: String| Err(ModelError::SchemaViolation(msg));
        if self.sex > 1 {
            return violation(format!("sex must be 0 or 1, got {}", self.sex));
        }
        if self.smoker > 1 {
            return violation(format!("smoker must be 0 or 1, got {}", self.smoker));
        }
        if usize::from(self.region) >= REGIONS.len() {
            return violation(format!("region must be 0-3, got {}", self.region));
        }
        if !(self.bmi.is_finite() && self.bmi > 0.0) {
            return violation(format!("bmi must be positive and finite, got {}", self.bmi));
        }
        if !(self.charges.is_finite() && self.charges >= 0.0) {
            return violation(format!("charges must be non-negative and finite, got {}", self.charges));
        }
        Ok(())
    }

    /// Raw feature values in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> FeatureVector {
        [
            f64::from(self.age),
            f64::from(self.sex),
            self.bmi,
            f64::from(self.children),
            f64::from(self.smoker),
            f64::from(self.region),
            self.charges,
        ]
    }

    /// The seven model fields as one comma-separated line, the size
    /// reference for storage overhead.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.age, self.sex, self.bmi, self.children, self.smoker, self.region, self.charges
        )
    }
}

/// Parses `0`/`1` or the usual spellings for the two-valued fields.
pub(crate) fn parse_binary(field: &str, value: &str, one: &str, zero: &str) -> Result<u8, ModelError> {
    let v = value.trim();
    if v.eq_ignore_ascii_case(one) {
        return Ok(1);
    }
    if v.eq_ignore_ascii_case(zero) {
        return Ok(0);
    }
    parse_code(field, v)
}

pub(crate) fn parse_region(value: &str) -> Result<u8, ModelError> {
    let v = value.trim();
    match REGIONS.iter().position(|r| r.eq_ignore_ascii_case(v)) {
        Some(i) => Ok(i as u8),
        None => parse_code("region", v),
    }
}

fn parse_code(field: &str, v: &str) -> Result<u8, ModelError> {
    v.parse::<u8>()
        .map_err(|_| ModelError::SchemaViolation(format!("{field}: cannot parse {v:?}")))
}
