use medclaim_core::dataset::{synthetic_records, Dataset, LabelRule};
use medclaim_core::model::{
    decide, fit_powers, fit_sigmoid_poly, fit_stats, logistic_gradient, logistic_loss, predict_plain, sigmoid,
    train_logistic, LinearModel, ModelError, ModelWeights, TrainParams, Verdict,
};
use medclaim_core::training::{train_model, TrainConfig};
use medclaim_core::{RawRecord, FEATURE_COUNT};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rec(age: u32, bmi: f64, charges: f64) -> RawRecord {
    RawRecord::new(age, (age % 2) as u8, bmi, age % 3, (age % 5 == 0) as u8, (age % 4) as u8, charges)
}

#[test]
fn two_point_statistics() {
    let records = [RawRecord::new(20, 0, 20.0, 0, 0, 0, 1000.0), RawRecord::new(40, 1, 30.0, 2, 1, 3, 3000.0)];
    let stats = fit_stats(&records).unwrap();
    let expected_mean = [30.0, 0.5, 25.0, 1.0, 0.5, 1.5, 2000.0];
    let gaps = [20.0, 1.0, 10.0, 2.0, 1.0, 3.0, 2000.0];
    for j in 0..FEATURE_COUNT {
        assert!((stats.mean[j] - expected_mean[j]).abs() < 1e-12);
        // sample std of two points is |a - b| / sqrt(2)
        assert!((stats.std[j] - gaps[j] / 2f64.sqrt()).abs() < 1e-12);
    }
    let z = stats.preprocess(&records[0]).unwrap();
    for v in z {
        assert!((v + 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn constant_column_is_degenerate() {
    let records: Vec<RawRecord> = (0..10).map(|i| rec(20 + i, 25.0, 100.0 * f64::from(i + 1))).collect();
    assert!(matches!(fit_stats(&records), Err(ModelError::DegenerateColumn("bmi"))));
    assert!(matches!(fit_stats(&records[..1]), Err(ModelError::TooFewRecords { needed: 2, found: 1 })));
}

#[test]
fn standardization_matches_welford() {
    let records = synthetic_records(500, 3);
    let stats = fit_stats(&records).unwrap();
    for j in 0..FEATURE_COUNT {
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for r in &records {
            let x = r.features()[j];
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        let std = (m2 / (n - 1.0)).sqrt();
        assert!((stats.mean[j] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        assert!((stats.std[j] - std).abs() <= 1e-9 * std);
    }
    let zs: Vec<[f64; FEATURE_COUNT]> = records.iter().map(|r| stats.preprocess(r).unwrap()).collect();
    for j in 0..FEATURE_COUNT {
        let m: f64 = zs.iter().map(|z| z[j]).sum::<f64>() / zs.len() as f64;
        let v: f64 = zs.iter().map(|z| (z[j] - m).powi(2)).sum::<f64>() / (zs.len() - 1) as f64;
        assert!(m.abs() < 1e-9);
        assert!((v - 1.0).abs() < 1e-9);
    }
}

#[test]
fn invalid_record_rejected_by_preprocess() {
    let stats = fit_stats(&synthetic_records(50, 1)).unwrap();
    let bad = RawRecord::new(30, 3, 25.0, 0, 0, 0, 10.0);
    assert!(matches!(stats.preprocess(&bad), Err(ModelError::SchemaViolation(_))));
}

fn separable(n: usize, seed: u64) -> (Vec<[f64; 2]>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let s: f64 = p[0] + p[1];
        if s.abs() < 0.3 {
            continue;
        }
        x.push(p);
        y.push(u8::from(s > 0.0));
    }
    (x, y)
}

#[test]
fn separable_toy_reaches_full_accuracy() {
    let (x, y) = separable(200, 11);
    let params = TrainParams { learning_rate: 0.1, epochs: 500 };
    let model = train_logistic(&x, &y, &params).unwrap();
    let hits = x
        .iter()
        .zip(&y)
        .filter(|(p, &l)| u8::from(model.probability(p.as_slice()) > 0.5) == l)
        .count();
    assert!(hits as f64 / 200.0 >= 0.99, "accuracy {}", hits as f64 / 200.0);
}

#[test]
fn zero_epochs_leave_zero_weights() {
    let (x, y) = separable(20, 2);
    let model = train_logistic(&x, &y, &TrainParams { learning_rate: 0.1, epochs: 0 }).unwrap();
    assert_eq!(model, LinearModel::zeros(2));
    assert!((logistic_loss(&model, &x, &y) - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn training_is_deterministic() {
    let (x, y) = separable(60, 5);
    let p = TrainParams { learning_rate: 0.05, epochs: 50 };
    assert_eq!(train_logistic(&x, &y, &p).unwrap(), train_logistic(&x, &y, &p).unwrap());
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x: Vec<Vec<f64>> = (0..40).map(|_| (0..FEATURE_COUNT).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let y: Vec<u8> = (0..40).map(|_| rng.gen_range(0..2)).collect();
    let h = 1e-5;
    for _ in 0..20 {
        let model = LinearModel {
            beta: (0..FEATURE_COUNT).map(|_| rng.gen_range(-1.5..1.5)).collect(),
            intercept: rng.gen_range(-1.0..1.0),
        };
        let (g, g0) = logistic_gradient(&model, &x, &y);
        let mut analytic = g.clone();
        analytic.push(g0);
        let mut numeric = Vec::new();
        for k in 0..=FEATURE_COUNT {
            let shifted = |d: f64| {
                let mut m = model.clone();
                if k < FEATURE_COUNT {
                    m.beta[k] += d;
                } else {
                    m.intercept += d;
                }
                logistic_loss(&m, &x, &y)
            };
            numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm <= 1e-6, "relative error {}", diff / norm);
    }
}

#[test]
fn training_input_errors() {
    let x = vec![[0.0, 1.0], [1.0, 0.0]];
    assert!(matches!(
        train_logistic(&x, &[0], &TrainParams::default()),
        Err(ModelError::ShapeMismatch { .. })
    ));
    assert!(matches!(
        train_logistic(&x, &[0, 2], &TrainParams::default()),
        Err(ModelError::NonBinaryLabels { row: 1 })
    ));
    let empty: Vec<[f64; 2]> = Vec::new();
    assert!(matches!(
        train_logistic(&empty, &[], &TrainParams::default()),
        Err(ModelError::EmptyDataset)
    ));
}

fn weights_with(beta: [f64; FEATURE_COUNT], intercept: f64) -> ModelWeights {
    let stats = fit_stats(&synthetic_records(30, 4)).unwrap();
    let linear = LinearModel { beta: beta.to_vec(), intercept };
    ModelWeights::new(&linear, stats, fit_sigmoid_poly(5.0, 2001).unwrap(), LabelRule::Explicit).unwrap()
}

#[test]
fn plain_prediction_cases() {
    let zero = weights_with([0.0; FEATURE_COUNT], 0.0);
    assert_eq!(predict_plain(&[0.7; FEATURE_COUNT], &zero), 0.5);

    let mut beta = [0.0; FEATURE_COUNT];
    beta[0] = 1.0;
    let w = weights_with(beta, 0.0);
    let mut x = [0.0; FEATURE_COUNT];
    x[0] = 3f64.ln();
    assert!((predict_plain(&x, &w) - 0.75).abs() < 1e-15);

    let w = weights_with([0.0; FEATURE_COUNT], 2f64.ln() - 5f64.ln());
    assert!((predict_plain(&x, &w) - 2.0 / 7.0).abs() < 1e-15);
}

#[test]
fn decision_threshold_is_strict() {
    assert_eq!(decide(0.5).unwrap().verdict, Verdict::Denied);
    assert_eq!(decide(0.500_000_1).unwrap().verdict, Verdict::Approved);
    assert_eq!(decide(0.0).unwrap().verdict, Verdict::Denied);
    assert_eq!(decide(1.0).unwrap().verdict, Verdict::Approved);
    assert!(matches!(decide(1.2), Err(ModelError::OutOfRange(_))));
    assert!(matches!(decide(-0.1), Err(ModelError::OutOfRange(_))));
    assert!(decide(f64::NAN).is_err());
    assert_eq!(Verdict::Approved.to_string(), "Approved");
}

#[test]
fn weights_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let w = weights_with([0.1, -0.2, 0.3, 0.0, -1.0, 0.05, -2.0], 0.4);
    w.save(&path).unwrap();
    assert_eq!(ModelWeights::load(&path).unwrap(), w);

    let mut tampered = w.clone();
    tampered.threshold = 0.6;
    tampered.save(&path).unwrap();
    assert!(matches!(ModelWeights::load(&path), Err(ModelError::Format(_))));
}

#[test]
fn cubic_fit_matches_taylor_on_a_tiny_interval() {
    let fit = fit_sigmoid_poly(0.01, 201).unwrap();
    assert!((fit.c0 - 0.5).abs() < 1e-12);
    assert!((fit.c1 - 0.25).abs() < 1e-9);
    assert!((fit.c3 + 1.0 / 48.0).abs() < 1e-4);
}

#[test]
fn even_coefficient_vanishes_on_symmetric_interval() {
    let c = fit_powers(&[0, 1, 2, 3], 5.0, 2001).unwrap();
    assert!(c[2].abs() <= 1e-9, "c2 = {}", c[2]);
}

fn normal_equations(powers: &[i32], b: f64, points: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..points).map(|i| -b + 2.0 * b * i as f64 / (points - 1) as f64).collect();
    let a = DMatrix::from_fn(points, powers.len(), |i, j| xs[i].powi(powers[j]));
    let y = DVector::from_iterator(points, xs.iter().map(|&x| 1.0 / (1.0 + (-x).exp())));
    let ata = a.transpose() * &a;
    let aty = a.transpose() * y;
    ata.lu().solve(&aty).unwrap().iter().copied().collect()
}

#[test]
fn cubic_fit_on_five_matches_normal_equations() {
    let fit = fit_sigmoid_poly(5.0, 2001).unwrap();
    let oracle = normal_equations(&[0, 1, 3], 5.0, 2001);
    for (got, want) in [fit.c0, fit.c1, fit.c3].iter().zip(&oracle) {
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1e-3), "{got} vs {want}");
    }
    let mut oracle_err: f64 = 0.0;
    for i in 0..2001 {
        let x = -5.0 + 10.0 * i as f64 / 2000.0;
        let p = oracle[0] + oracle[1] * x + oracle[2] * x * x * x;
        let e = (p - sigmoid(x)).abs();
        oracle_err = oracle_err.max(e);
        assert!((fit.eval(x) - sigmoid(x)).abs() <= fit.max_err + 1e-15);
    }
    assert!((fit.max_err - oracle_err).abs() < 1e-9);
    assert!(fit.max_err <= 0.1);
    assert!((fit.c0 - 0.5).abs() <= 1e-3);
}

#[test]
fn fit_argument_errors() {
    for b in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(fit_sigmoid_poly(b, 100), Err(ModelError::InvalidInterval(_))));
    }
    assert!(matches!(fit_sigmoid_poly(5.0, 2), Err(ModelError::InvalidGrid { needed: 3, found: 2 })));
}

#[test]
fn pipeline_on_synthetic_data() {
    let ds = Dataset { records: synthetic_records(1000, 21), labels: None };
    let report = train_model(&ds, &TrainConfig::default()).unwrap();
    assert_eq!(report.n_train + report.n_test, 1000);
    assert_eq!(report.n_test, 200);
    assert!(report.test_accuracy > 0.85, "test accuracy {}", report.test_accuracy);
    assert!(report.forest_test_accuracy.unwrap() > 0.8);
    // Default training keeps scores where the cubic surrogate is accurate.
    assert!(report.outside_fit_fraction <= 0.05, "outside {}", report.outside_fit_fraction);
    assert!(report.surrogate_test_accuracy >= report.test_accuracy - 0.02);
    match report.weights.label_rule {
        LabelRule::ChargesPercentile { percentile, .. } => assert_eq!(percentile, 75.0),
        LabelRule::Explicit => panic!("expected percentile rule"),
    }
}

#[test]
fn pipeline_uses_explicit_labels() {
    let records = synthetic_records(300, 8);
    let labels: Vec<u8> = records.iter().map(|r| r.smoker).collect();
    let ds = Dataset { records, labels: Some(labels) };
    let cfg = TrainConfig { forest: None, ..TrainConfig::default() };
    let report = train_model(&ds, &cfg).unwrap();
    assert_eq!(report.weights.label_rule, LabelRule::Explicit);
    assert!(report.test_accuracy >= 0.99);
    assert!(report.forest_test_accuracy.is_none());
}

#[test]
fn pipeline_rejects_empty_dataset() {
    let ds = Dataset { records: Vec::new(), labels: None };
    assert!(matches!(train_model(&ds, &TrainConfig::default()), Err(ModelError::EmptyDataset)));
}

proptest! {
    #[test]
    fn sigmoid_is_point_symmetric(z in -800.0f64..800.0) {
        let s = sigmoid(z);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert!((s + sigmoid(-z) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decide_agrees_with_threshold(p in 0.0f64..=1.0) {
        let d = decide(p).unwrap();
        prop_assert_eq!(d.verdict == Verdict::Approved, p > 0.5);
    }

    #[test]
    fn small_gradient_step_lowers_loss(w0 in -1.0f64..1.0, w1 in -1.0f64..1.0, b in -1.0f64..1.0) {
        let (x, y) = separable(30, 17);
        let model = LinearModel { beta: vec![w0, w1], intercept: b };
        let (g, g0) = logistic_gradient(&model, &x, &y);
        let step = LinearModel {
            beta: model.beta.iter().zip(&g).map(|(w, gj)| w - 1e-3 * gj).collect(),
            intercept: b - 1e-3 * g0,
        };
        prop_assert!(logistic_loss(&step, &x, &y) <= logistic_loss(&model, &x, &y));
    }
}
