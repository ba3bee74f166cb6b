use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{sigmoid, LinearModel, ModelError, NormStats, SigmoidFit, THRESHOLD};
use crate::dataset::LabelRule;
use crate::record::{FeatureVector, FEATURE_COUNT};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Everything the client needs to standardize inputs and interpret scores;
/// stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub format_version: u32,
    pub beta: FeatureVector,
    pub intercept: f64,
    pub norm_stats: NormStats,
    pub sigmoid: SigmoidFit,
    pub threshold: f64,
    pub label_rule: LabelRule,
}

impl ModelWeights {
    pub fn new(
        linear: &LinearModel,
        norm_stats: NormStats,
        sigmoid: SigmoidFit,
        label_rule: LabelRule,
    ) -> Result<Self, ModelError> {
        let beta: FeatureVector = linear.beta.as_slice().try_into().map_err(|_| ModelError::ShapeMismatch {
            expected: FEATURE_COUNT,
            found: linear.beta.len(),
        })?;
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            beta,
            intercept: linear.intercept,
            norm_stats,
            sigmoid,
            threshold: THRESHOLD,
            label_rule,
        })
    }

    /// `beta . x + b` on standardized features.
    pub fn score(&self, features: &FeatureVector) -> f64 {
        self.beta.iter().zip(features).map(|(b, x)| b * x).sum::<f64>() + self.intercept
    }

    /// What the encrypted circuit computes, evaluated in the clear.
    pub fn circuit_replica(&self, features: &FeatureVector) -> f64 {
        self.sigmoid.eval(self.score(features))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| ModelError::Format(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        let w: Self = serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
        if w.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported model version {}",
                w.format_version
            )));
        }
        if w.threshold != THRESHOLD {
            return Err(ModelError::Format(format!("threshold must be {THRESHOLD}")));
        }
        Ok(w)
    }
}

/// Exact-sigmoid probability for standardized features.
pub fn predict_plain(features: &FeatureVector, weights: &ModelWeights) -> f64 {
    sigmoid(weights.score(features))
}
