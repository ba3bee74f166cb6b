//! Dataset in, client and server model artifacts out.

use serde::{Deserialize, Serialize};

use crate::dataset::{train_test_split, Dataset, LabelRule, DEFAULT_PERCENTILE};
use crate::model::{
    accuracy, fit_sigmoid_poly, fit_stats, train_logistic, ForestParams, ModelError, ModelWeights, RandomForest,
    TrainParams,
};
use crate::record::{FeatureVector, RawRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gd: TrainParams,
    /// Used only when the dataset has no label column.
    pub label_percentile: f64,
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Half-width `B` of the sigmoid fit interval.
    pub sigmoid_interval: f64,
    pub grid_points: usize,
    /// Tree-ensemble baseline; `None` skips it.
    pub forest: Option<ForestParams>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gd: TrainParams::default(),
            label_percentile: DEFAULT_PERCENTILE,
            test_fraction: 0.2,
            split_seed: 7,
            sigmoid_interval: 5.0,
            grid_points: 2001,
            forest: Some(ForestParams::default()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    #[serde(skip)]
    pub weights: ModelWeights,
    pub n_train: usize,
    pub n_test: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Test accuracy when thresholding the cubic surrogate instead of the
    /// exact sigmoid.
    pub surrogate_test_accuracy: f64,
    pub forest_test_accuracy: Option<f64>,
    pub sigmoid_max_err: f64,
    /// Share of all records whose score falls outside `[-(B-1), B-1]`.
    pub outside_fit_fraction: f64,
}

/// Fits statistics and the label cap on the training split only, trains by
/// gradient descent and fits the sigmoid surrogate.
pub fn train_model(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport, ModelError> {
    if ds.records.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let (train_idx, test_idx) = train_test_split(ds.records.len(), cfg.test_fraction, cfg.split_seed);
    let train_records: Vec<RawRecord> = train_idx.iter().map(|&i| ds.records[i].clone()).collect();

    let rule = match &ds.labels {
        Some(_) => LabelRule::Explicit,
        None => LabelRule::from_percentile(&train_records, cfg.label_percentile)?,
    };
    let labels: Vec<u8> = match &ds.labels {
        Some(l) => l.clone(),
        None => ds.records.iter().map(|r| rule.label(r).expect("percentile rule labels every record")).collect(),
    };

    let stats = fit_stats(&train_records)?;
    let x: Vec<FeatureVector> = ds
        .records
        .iter()
        .map(|r| stats.preprocess(r))
        .collect::<Result<_, _>>()?;
    let pick = |idx: &[usize]| -> (Vec<FeatureVector>, Vec<u8>) {
        idx.iter().map(|&i| (x[i], labels[i])).unzip()
    };
    let (x_train, y_train) = pick(&train_idx);
    let (x_test, y_test) = pick(&test_idx);

    let linear = train_logistic(&x_train, &y_train, &cfg.gd)?;
    let fit = fit_sigmoid_poly(cfg.sigmoid_interval, cfg.grid_points)?;
    let weights = ModelWeights::new(&linear, stats, fit, rule)?;

    let exact = |xs: &[FeatureVector]| -> Vec<u8> { xs.iter().map(|f| u8::from(weights.score(f) > 0.0)).collect() };
    let surrogate: Vec<u8> = x_test
        .iter()
        .map(|f| u8::from(weights.circuit_replica(f) > weights.threshold))
        .collect();

    let forest_test_accuracy = match &cfg.forest {
        Some(params) => {
            let forest = RandomForest::fit(&x_train, &y_train, params)?;
            let pred: Vec<u8> = x_test.iter().map(|f| forest.predict(f)).collect();
            Some(accuracy(&pred, &y_test))
        }
        None => None,
    };

    let edge = cfg.sigmoid_interval - 1.0;
    let outside = x.iter().filter(|f| weights.score(f).abs() > edge).count();

    Ok(TrainReport {
        n_train: x_train.len(),
        n_test: x_test.len(),
        train_accuracy: accuracy(&exact(&x_train), &y_train),
        test_accuracy: accuracy(&exact(&x_test), &y_test),
        surrogate_test_accuracy: accuracy(&surrogate, &y_test),
        forest_test_accuracy,
        sigmoid_max_err: fit.max_err,
        outside_fit_fraction: outside as f64 / x.len() as f64,
        weights,
    })
}
