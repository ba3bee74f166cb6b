use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Decision threshold on the probability; ties go to `Denied`.
pub const THRESHOLD: f64 = 0.5;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            beta: vec![0.0; dim],
            intercept: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>() + self.intercept
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 100,
        }
    }
}

fn check_inputs<R: AsRef<[f64]>>(x: &[R], y: &[u8]) -> Result<usize, ModelError> {
    let dim = x.first().ok_or(ModelError::EmptyDataset)?.as_ref().len();
    if x.len() != y.len() {
        return Err(ModelError::ShapeMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if let Some(row) = x.iter().position(|r| r.as_ref().len() != dim) {
        return Err(ModelError::ShapeMismatch {
            expected: dim,
            found: x[row].as_ref().len(),
        });
    }
    if let Some(row) = y.iter().position(|&l| l > 1) {
        return Err(ModelError::NonBinaryLabels { row });
    }
    Ok(dim)
}

/// Mean binary cross-entropy of `model` on `(x, y)`.
pub fn logistic_loss<R: AsRef<[f64]>>(model: &LinearModel, x: &[R], y: &[u8]) -> f64 {
    let total: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = model.score(row.as_ref());
            softplus(z) - f64::from(label) * z
        })
        .sum();
    total / x.len() as f64
}

/// Gradient of [`logistic_loss`]: `(d/d beta, d/d intercept)`.
pub fn logistic_gradient<R: AsRef<[f64]>>(model: &LinearModel, x: &[R], y: &[u8]) -> (Vec<f64>, f64) {
    let mut g = vec![0.0; model.beta.len()];
    let mut g0 = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let row = row.as_ref();
        let r = sigmoid(model.score(row)) - f64::from(label);
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
        g0 += r;
    }
    let n = x.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    (g, g0 / n)
}

/// Full-batch gradient descent from all-zero weights. The procedure has no
/// random component, so identical inputs always give identical weights.
pub fn train_logistic<R: AsRef<[f64]>>(
    x: &[R],
    y: &[u8],
    params: &TrainParams,
) -> Result<LinearModel, ModelError> {
    let dim = check_inputs(x, y)?;
    let mut model = LinearModel::zeros(dim);
    for _ in 0..params.epochs {
        let (g, g0) = logistic_gradient(&model, x, y);
        for (b, gj) in model.beta.iter_mut().zip(&g) {
            *b -= params.learning_rate * gj;
        }
        model.intercept -= params.learning_rate * g0;
    }
    Ok(model)
}

/// Fraction of positions where `predicted == actual`.
pub fn accuracy(predicted: &[u8], actual: &[u8]) -> f64 {
    if actual.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    hits as f64 / actual.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Approved,
    Denied,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Approved => "Approved",
            Verdict::Denied => "Denied",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimDecision {
    pub probability: f64,
    pub verdict: Verdict,
}

/// Approves strictly above [`THRESHOLD`].
pub fn decide(probability: f64) -> Result<ClaimDecision, ModelError> {
    if !(0.0..=1.0).contains(&probability) {
        return Err(ModelError::OutOfRange(probability));
    }
    let verdict = if probability > THRESHOLD {
        Verdict::Approved
    } else {
        Verdict::Denied
    };
    Ok(ClaimDecision { probability, verdict })
}
