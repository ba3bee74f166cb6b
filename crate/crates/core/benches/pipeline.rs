use criterion::{criterion_group, criterion_main, Criterion};
use medclaim_ckks::{keygen, CkksContext, HeParams};
use medclaim_core::dataset::{synthetic_records, Dataset};
use medclaim_core::envelope::{content_hash, seal, sym_keygen};
use medclaim_core::ledger::Ledger;
use medclaim_core::model::{encrypt_model, predict_encrypted_batch, ForestParams, RandomForest, WeightMode};
use medclaim_core::par;
use medclaim_core::training::{train_model, TrainConfig};
use medclaim_core::workflow::verify_artifacts;

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

fn bench_pipeline(c: &mut Criterion) {
    let params = HeParams::default();
    let keys = keygen(&params, Some(1)).unwrap();
    let ctx = CkksContext::new(params).unwrap();
    let ds = Dataset { records: synthetic_records(1000, 5), labels: None };
    let report = train_model(&ds, &TrainConfig { forest: None, ..TrainConfig::default() }).unwrap();
    let w = report.weights;
    let model = encrypt_model(&w, &ctx, &keys.public_key, WeightMode::CtCt).unwrap();
    let batch: Vec<_> = ds.records[..16]
        .iter()
        .map(|r| {
            let x = w.norm_stats.preprocess(r).unwrap();
            ctx.encrypt_fresh(&ctx.encode_default(&x).unwrap(), &keys.public_key).unwrap()
        })
        .collect();

    let mut g = c.benchmark_group(format!("pipeline/{MODE}"));
    g.sample_size(10);
    g.bench_function("predict_batch_16", |b| {
        b.iter(|| predict_encrypted_batch(&ctx, &batch, &model, &keys.eval_keys))
    });

    let x: Vec<_> = ds.records.iter().map(|r| w.norm_stats.preprocess(r).unwrap()).collect();
    let y: Vec<u8> = ds.records.iter().map(|r| w.label_rule.label(r).unwrap()).collect();
    g.bench_function("forest_fit_1000x50", |b| {
        b.iter(|| RandomForest::fit(&x, &y, &ForestParams::default()).unwrap())
    });

    // One pass of the tamper sweep over the request envelope of a claim.
    let dir = tempfile::tempdir().unwrap();
    let mut ledger = Ledger::open(&dir.path().join("ledger.bin")).unwrap();
    let key = sym_keygen(Some(2));
    let req = batch[0].to_bytes();
    let res = batch[1].to_bytes();
    ledger.log_computation("c", &content_hash(&req), None).unwrap();
    ledger.log_computation("c", &content_hash(&req), Some(&content_hash(&res))).unwrap();
    let req_env = seal(&req, &key).to_bytes();
    let res_env = seal(&res, &key).to_bytes();
    let positions: Vec<usize> = (0..req_env.len()).step_by(req_env.len() / 256).collect();
    g.bench_function("tamper_sweep_256", |b| {
        b.iter(|| {
            let detected = par::map_slice(&positions, |&pos| {
                let mut m = req_env.clone();
                m[pos] ^= 1;
                !verify_artifacts("c", &m, &res_env, &key, &ledger).verification.is_valid()
            });
            assert!(detected.iter().all(|&d| d));
        })
    });
    g.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
