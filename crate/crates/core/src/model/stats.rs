use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::record::{FeatureVector, RawRecord, FEATURE_COUNT, FEATURE_NAMES};

/// Per-feature mean and sample standard deviation of the training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: FeatureVector,
    pub std: FeatureVector,
}

/// Fits standardization statistics using the sample (n - 1) convention.
pub fn fit_stats(records: &[RawRecord]) -> Result<NormStats, ModelError> {
    if records.len() < 2 {
        return Err(ModelError::TooFewRecords {
            needed: 2,
            found: records.len(),
        });
    }
    let n = records.len() as f64;
    let mut mean = [0.0; FEATURE_COUNT];
    for r in records {
        for (m, x) in mean.iter_mut().zip(r.features()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut var = [0.0; FEATURE_COUNT];
    for r in records {
        for ((v, x), m) in var.iter_mut().zip(r.features()).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let mut std = [0.0; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        std[j] = (var[j] / (n - 1.0)).sqrt();
        // Relative test so that large-valued columns with rounding noise
        // still count as constant.
        if std[j].is_nan() || std[j] <= 1e-12 * mean[j].abs().max(1.0) {
            return Err(ModelError::DegenerateColumn(FEATURE_NAMES[j]));
        }
    }
    Ok(NormStats { mean, std })
}

impl NormStats {
    /// Z-scores a validated record in training-schema order.
    pub fn preprocess(&self, record: &RawRecord) -> Result<FeatureVector, ModelError> {
        record.validate()?;
        Ok(self.standardize(&record.features()))
    }

    pub fn standardize(&self, raw: &FeatureVector) -> FeatureVector {
        std::array::from_fn(|j| (raw[j] - self.mean[j]) / self.std[j])
    }
}
