use std::sync::OnceLock;

use medclaim_ckks::{keygen, CkksContext, HeError, HeParams, KeyBundle};
use medclaim_core::dataset::{synthetic_records, Dataset};
use medclaim_core::model::{
    encrypt_model, fit_sigmoid_poly, predict_encrypted, predict_encrypted_batch, predict_plain,
    EncryptedModel, LinearModel, ModelError, ModelWeights, WeightMode,
};
use medclaim_core::training::{train_model, TrainConfig};
use medclaim_core::{dataset::LabelRule, FEATURE_COUNT};

struct Fixture {
    ctx: CkksContext,
    keys: KeyBundle,
    weights: ModelWeights,
    records: Vec<medclaim_core::RawRecord>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let params = HeParams::default();
        let ctx = CkksContext::new(params.clone()).unwrap();
        let keys = keygen(&params, Some(5)).unwrap();
        let ds = Dataset { records: synthetic_records(600, 31), labels: None };
        let cfg = TrainConfig { forest: None, ..TrainConfig::default() };
        let weights = train_model(&ds, &cfg).unwrap().weights;
        Fixture { ctx, keys, weights, records: synthetic_records(40, 77) }
    })
}

fn decrypt_slots(f: &Fixture, ct: &medclaim_ckks::Ciphertext) -> Vec<f64> {
    f.ctx.decode(&f.ctx.decrypt(ct, &f.keys.secret_key).unwrap())
}

#[test]
fn encrypted_weights_roundtrip() {
    let f = fixture();
    let model = encrypt_model(&f.weights, &f.ctx, &f.keys.public_key, WeightMode::CtCt).unwrap();
    assert_eq!(model.mode(), WeightMode::CtCt);
    let beta = decrypt_slots(f, model.beta_ciphertext().unwrap());
    for j in 0..FEATURE_COUNT {
        assert!((beta[j] - f.weights.beta[j]).abs() <= 1e-4, "slot {j}");
    }
    assert!(beta[FEATURE_COUNT..].iter().all(|v| v.abs() <= 1e-4));
    assert_eq!(model.sigmoid, f.weights.sigmoid.cubic());
    assert_eq!(model.fit_interval, 5.0);

    let restored = EncryptedModel::from_bytes(&model.to_bytes(), &f.ctx).unwrap();
    assert_eq!(restored.to_bytes(), model.to_bytes());
}

#[test]
fn plaintext_weight_mode() {
    let f = fixture();
    let model = encrypt_model(&f.weights, &f.ctx, &f.keys.public_key, WeightMode::CtPt).unwrap();
    assert_eq!(model.mode(), WeightMode::CtPt);
    assert!(model.beta_ciphertext().is_none());
    let beta = f.ctx.decode(model.beta_plaintext().unwrap());
    for j in 0..FEATURE_COUNT {
        assert!((beta[j] - f.weights.beta[j]).abs() <= 1e-6);
    }
    let restored = EncryptedModel::from_bytes(&model.to_bytes(), &f.ctx).unwrap();
    assert_eq!(restored.mode(), WeightMode::CtPt);
    assert_eq!("ct-pt".parse::<WeightMode>().unwrap(), WeightMode::CtPt);
    assert_eq!(WeightMode::CtCt.to_string(), "ct-ct");
}

#[test]
fn model_rejects_foreign_context_and_shallow_chains() {
    let f = fixture();
    let small = HeParams::generate(2048, 50, &[35, 35, 35], 51, 35);
    let small_keys = keygen(&small, Some(1)).unwrap();
    assert!(matches!(
        encrypt_model(&f.weights, &f.ctx, &small_keys.public_key, WeightMode::CtCt),
        Err(ModelError::He(HeError::KeyParamsMismatch))
    ));

    let shallow = HeParams::generate(2048, 50, &[35, 35], 51, 35);
    let shallow_ctx = CkksContext::new(shallow.clone()).unwrap();
    let shallow_keys = keygen(&shallow, Some(1)).unwrap();
    assert!(matches!(
        encrypt_model(&f.weights, &shallow_ctx, &shallow_keys.public_key, WeightMode::CtCt),
        Err(ModelError::He(HeError::InvalidParams(_)))
    ));

    let model = encrypt_model(&f.weights, &f.ctx, &f.keys.public_key, WeightMode::CtCt).unwrap();
    assert!(EncryptedModel::from_bytes(&model.to_bytes()[..40], &f.ctx).is_err());
    assert!(EncryptedModel::from_bytes(b"EMD0", &f.ctx).is_err());
}

#[test]
fn zero_weights_score_one_half() {
    let f = fixture();
    let linear = LinearModel::zeros(FEATURE_COUNT);
    let w = ModelWeights::new(&linear, f.weights.norm_stats.clone(), fit_sigmoid_poly(5.0, 2001).unwrap(), LabelRule::Explicit)
        .unwrap();
    let model = encrypt_model(&w, &f.ctx, &f.keys.public_key, WeightMode::CtCt).unwrap();
    let x = w.norm_stats.preprocess(&f.records[0]).unwrap();
    let enc_x = f.ctx.encrypt_fresh(&f.ctx.encode_default(&x).unwrap(), &f.keys.public_key).unwrap();
    let out = predict_encrypted(&f.ctx, &enc_x, &model, &f.keys.eval_keys).unwrap();
    assert_eq!(out.level(), 1);
    let p = decrypt_slots(f, &out)[0];
    assert!((p - w.sigmoid.c0).abs() < 1e-3, "p = {p}");
}

fn check_against_replica(mode: WeightMode) {
    let f = fixture();
    let model = encrypt_model(&f.weights, &f.ctx, &f.keys.public_key, mode).unwrap();
    let inputs: Vec<_> = f
        .records
        .iter()
        .map(|r| {
            let x = f.weights.norm_stats.preprocess(r).unwrap();
            let ct = f.ctx.encrypt_fresh(&f.ctx.encode_default(&x).unwrap(), &f.keys.public_key).unwrap();
            (x, ct)
        })
        .collect();
    let cts: Vec<_> = inputs.iter().map(|(_, ct)| ct.clone()).collect();
    let outputs = predict_encrypted_batch(&f.ctx, &cts, &model, &f.keys.eval_keys);
    for ((x, _), out) in inputs.iter().zip(outputs) {
        let got = decrypt_slots(f, &out.unwrap())[0];
        let want = f.weights.circuit_replica(x);
        assert!((got - want).abs() <= 0.02, "{got} vs {want}");
        let z = f.weights.score(x);
        let exact = predict_plain(x, &f.weights);
        if z.abs() <= 4.0 && (exact - 0.5).abs() > 0.01 {
            assert_eq!(got > 0.5, exact > 0.5, "z = {z}");
        }
    }
}

#[test]
fn encrypted_prediction_tracks_replica_ct_ct() {
    check_against_replica(WeightMode::CtCt);
}

#[test]
fn encrypted_prediction_tracks_replica_ct_pt() {
    check_against_replica(WeightMode::CtPt);
}

#[test]
fn prediction_needs_three_levels() {
    let f = fixture();
    let model = encrypt_model(&f.weights, &f.ctx, &f.keys.public_key, WeightMode::CtCt).unwrap();
    let x = f.weights.norm_stats.preprocess(&f.records[1]).unwrap();
    let pt = f.ctx.encode(&x, 2, f.ctx.default_scale()).unwrap();
    let enc_x = f.ctx.encrypt_fresh(&pt, &f.keys.public_key).unwrap();
    assert!(matches!(
        predict_encrypted(&f.ctx, &enc_x, &model, &f.keys.eval_keys),
        Err(ModelError::He(HeError::NoLevelsRemaining { needed: 3, available: 2 }))
    ));
}
