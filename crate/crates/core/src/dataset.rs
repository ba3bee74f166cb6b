//! CSV ingestion, label derivation and a synthetic record generator.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::model::ModelError;
use crate::record::{parse_binary, parse_region, RawRecord, FEATURE_NAMES};

/// Default approval cut: claims at or below this percentile of training
/// charges are labelled approvable.
pub const DEFAULT_PERCENTILE: f64 = 75.0;

/// How binary labels were obtained for a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelRule {
    /// `label = 1` iff `charges <= cap`, where `cap` is the given
    /// percentile of the training charges.
    ChargesPercentile { percentile: f64, cap: f64 },
    /// Labels came from a `label` column.
    Explicit,
}

impl LabelRule {
    pub fn from_percentile(records: &[RawRecord], percentile: f64) -> Result<Self, ModelError> {
        if records.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        if !(0.0..=100.0).contains(&percentile) {
            return Err(ModelError::SchemaViolation(format!(
                "percentile must lie in [0, 100], got {percentile}"
            )));
        }
        let charges: Vec<f64> = records.iter().map(|r| r.charges).collect();
        Ok(LabelRule::ChargesPercentile {
            percentile,
            cap: percentile_of(&charges, percentile),
        })
    }

    /// The rule's label for `record`, or `None` for explicit labels.
    pub fn label(&self, record: &RawRecord) -> Option<u8> {
        match self {
            LabelRule::ChargesPercentile { cap, .. } => Some(u8::from(record.charges <= *cap)),
            LabelRule::Explicit => None,
        }
    }
}

/// Linearly interpolated percentile (the convention where the minimum is
/// the 0th and the maximum the 100th percentile).
pub fn percentile_of(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (rank - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<RawRecord>,
    /// Present iff the file had a `label` column.
    pub labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn read_path(path: &Path) -> Result<Self, ModelError> {
        Self::read(std::fs::File::open(path)?)
    }

    /// Reads `age,sex,bmi,children,smoker,region,charges[,label]`. Sex,
    /// smoker and region also accept their textual spellings.
    pub fn read<R: Read>(input: R) -> Result<Self, ModelError> {
        let schema = |msg: String| ModelError::SchemaViolation(msg);
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = reader.headers().map_err(|e| schema(e.to_string()))?.clone();
        let names: Vec<&str> = header.iter().collect();
        let has_label = match names.len() {
            7 => false,
            8 if names[7] == "label" => true,
            _ => return Err(schema(format!("unexpected header {names:?}"))),
        };
        if names[..7] != FEATURE_NAMES {
            return Err(schema(format!("unexpected header {names:?}")));
        }

        let mut records = Vec::new();
        let mut labels = Vec::new();
        for (row, result) in reader.records().enumerate() {
            let rec = result.map_err(|e| schema(format!("row {}: {e}", row + 1)))?;
            let num = |i: usize| -> Result<f64, ModelError> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| schema(format!("row {}: {} = {:?}", row + 1, FEATURE_NAMES[i], &rec[i])))
            };
            let count = |i: usize| -> Result<u32, ModelError> {
                let v = num(i)?;
                if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
                    return Err(schema(format!("row {}: {} must be a count, got {v}", row + 1, FEATURE_NAMES[i])));
                }
                Ok(v as u32)
            };
            let record = RawRecord::new(
                count(0)?,
                parse_binary("sex", &rec[1], "male", "female")?,
                num(2)?,
                count(3)?,
                parse_binary("smoker", &rec[4], "yes", "no")?,
                parse_region(&rec[5])?,
                num(6)?,
            );
            record
                .validate()
                .map_err(|e| schema(format!("row {}: {e}", row + 1)))?;
            if has_label {
                let label = match &rec[7] {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(schema(format!("row {}: label {other:?}", row + 1))),
                };
                labels.push(label);
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(schema("no records".into()));
        }
        Ok(Self {
            records,
            labels: has_label.then_some(labels),
        })
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), ModelError> {
        let io = |e: csv::Error| ModelError::Format(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = FEATURE_NAMES.to_vec();
        if self.labels.is_some() {
            header.push("label");
        }
        w.write_record(&header).map_err(io)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row: Vec<String> = r.to_csv_line().split(',').map(str::to_owned).collect();
            if let Some(labels) = &self.labels {
                row.push(labels[i].to_string());
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<(), ModelError> {
        self.write(std::fs::File::create(path)?)
    }
}

/// Shuffled `(train, test)` index split.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let train = idx.split_off(n_test);
    (train, idx)
}

/// Records resembling the public medical-cost data: charges grow with age,
/// BMI and dependants, and jump for smokers (more so for obese smokers).
pub fn synthetic_records(n: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bmi_dist = Normal::new(30.7, 6.1).expect("valid normal");
    let noise = Normal::new(0.0, 4000.0).expect("valid normal");
    let children_dist = WeightedIndex::new([43, 24, 18, 12, 2, 1]).expect("valid weights");
    (0..n)
        .map(|_| {
            let age: u32 = rng.gen_range(18..=64);
            let sex = u8::from(rng.gen_bool(0.5));
            let bmi: f64 = bmi_dist.sample(&mut rng);
            let bmi = bmi.clamp(16.0, 53.0);
            let bmi = (bmi * 100.0).round() / 100.0;
            let children = children_dist.sample(&mut rng) as u32;
            let smoker = u8::from(rng.gen_bool(0.2));
            let region: u8 = rng.gen_range(0..4);
            let mut charges = 260.0 * f64::from(age) - 2500.0 + 320.0 * bmi + 480.0 * f64::from(children);
            if smoker == 1 {
                charges += 23_000.0 + if bmi > 30.0 { 19_000.0 } else { 0.0 };
            }
            charges += noise.sample(&mut rng);
            let charges = (charges.max(1121.87) * 100.0).round() / 100.0;
            RawRecord::new(age, sex, bmi, children, smoker, region, charges)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile_of(&v, 0.0), 1.0);
        assert_eq!(percentile_of(&v, 100.0), 5.0);
        assert_eq!(percentile_of(&v, 75.0), 4.0);
        assert_eq!(percentile_of(&[1.0, 2.0], 75.0), 1.75);
    }

    #[test]
    fn csv_roundtrip_with_labels() {
        let records = synthetic_records(20, 1);
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let ds = Dataset {
            records,
            labels: Some(labels),
        };
        let mut buf = Vec::new();
        ds.write(&mut buf).unwrap();
        assert!(buf.starts_with(b"age,sex,bmi,children,smoker,region,charges,label\n"));
        assert_eq!(Dataset::read(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn textual_encodings_accepted() {
        let text = "age,sex,bmi,children,smoker,region,charges\n19,female,27.9,0,yes,southwest,16884.924\n";
        let ds = Dataset::read(text.as_bytes()).unwrap();
        assert_eq!(ds.records[0], RawRecord::new(19, 0, 27.9, 0, 1, 0, 16884.924));
        assert!(ds.labels.is_none());
    }

    #[test]
    fn schema_errors() {
        for bad in [
            "",
            "age,sex,bmi,children,smoker,region,charges\n",
            "age,sex,bmi,children,smoker,region\n1,0,20,0,0,0\n",
            "age,sex,bmi,children,smoker,region,charges\n19,0,28,0,0,7,100\n",
            "age,sex,bmi,children,smoker,region,charges\n-3,0,28,0,0,1,100\n",
            "age,sex,bmi,children,smoker,region,charges,label\n19,0,28,0,0,1,100,2\n",
        ] {
            assert!(
                matches!(Dataset::read(bad.as_bytes()), Err(ModelError::SchemaViolation(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn split_partitions_indices() {
        let (train, test) = train_test_split(100, 0.2, 5);
        assert_eq!(test.len(), 20);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn synthetic_records_are_valid_and_seeded() {
        let a = synthetic_records(300, 9);
        assert_eq!(a, synthetic_records(300, 9));
        assert!(a.iter().all(|r| r.validate().is_ok()));
        assert!(a.iter().any(|r| r.smoker == 1) && a.iter().any(|r| r.smoker == 0));
    }
}
