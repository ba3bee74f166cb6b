//! Claim-decision model: standardization, logistic regression, the cubic
//! sigmoid surrogate, and the encrypted scoring circuit built on them.

mod encrypted;
mod forest;
mod logistic;
mod sigmoid;
mod stats;
mod weights;

use medclaim_ckks::HeError;
use thiserror::Error;

pub use encrypted::{encrypt_model, predict_encrypted, predict_encrypted_batch, EncryptedModel, WeightMode, CIRCUIT_DEPTH};
pub use forest::{ForestParams, RandomForest};
pub use logistic::{
    accuracy, decide, logistic_gradient, logistic_loss, sigmoid, train_logistic, ClaimDecision,
    LinearModel, TrainParams, Verdict, THRESHOLD,
};
pub use sigmoid::{fit_powers, fit_sigmoid_poly, SigmoidFit};
pub use stats::{fit_stats, NormStats};
pub use weights::{predict_plain, ModelWeights, MODEL_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("feature {0:?} is constant across the dataset")]
    DegenerateColumn(&'static str),
    #[error("need at least {needed} records, got {found}")]
    TooFewRecords { needed: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("labels must be 0 or 1 (row {row})")]
    NonBinaryLabels { row: usize },
    #[error("expected {expected} values per row, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("probability {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("fit interval must be positive and finite, got {0}")]
    InvalidInterval(f64),
    #[error("fit grid needs at least {needed} points, got {found}")]
    InvalidGrid { needed: usize, found: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
