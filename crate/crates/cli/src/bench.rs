//! Timed end-to-end runs against a throwaway key set, model and ledger.

use std::time::{Duration, Instant};

use medclaim_ckks::{keygen, CkksContext};
use medclaim_core::dataset::{synthetic_records, Dataset};
use medclaim_core::envelope::{content_hash, seal, sym_keygen};
use medclaim_core::ledger::Ledger;
use medclaim_core::model::encrypt_model;
use medclaim_core::training::train_model;
use medclaim_core::workflow::{Client, Exchange, Server};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, Exit};
use crate::output::Out;

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

const TRAINING_RECORDS: usize = 1000;

/// Published reference values, for side-by-side display only.
#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub enc_time_per_record_s: f64,
    pub claim_processing_s: f64,
    pub dec_time_s: f64,
    pub contract_exec_s: f64,
    pub throughput_tps: (f64, f64),
    pub storage_overhead_ratio: f64,
}

const REFERENCE: Reference = Reference {
    enc_time_per_record_s: 0.35,
    claim_processing_s: 2.4,
    dec_time_s: 0.22,
    contract_exec_s: 1.1,
    throughput_tps: (25.0, 30.0),
    storage_overhead_ratio: 2.3,
};

#[derive(Debug, Clone, Serialize)]
pub struct ParamsEcho {
    pub ring_dimension: usize,
    pub modulus_bits: Vec<u32>,
    pub special_bits: u32,
    pub scale_bits: u32,
    pub weight_mode: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// Encode, encrypt, serialize and seal one standardized record.
    pub enc_time_per_record_s: f64,
    /// Server side of one claim: open, hash check, encrypted scoring, seal,
    /// write and ledger completion.
    pub claim_processing_s: f64,
    /// Client side of one result: ledger verification, open and decrypt.
    pub dec_time_s: f64,
    /// One `log_computation` call, including the durable append.
    pub contract_exec_s: f64,
    /// Ledger transactions per second over the logging pass.
    pub throughput_tps: f64,
    /// Request envelope bytes per byte of plaintext CSV record.
    pub storage_overhead_ratio: f64,
    pub n_records: usize,
    pub mode: &'static str,
    pub params: ParamsEcho,
    pub hardware: String,
    pub reference: Reference,
    pub notes: Vec<String>,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn mean(total: Duration, n: usize) -> f64 {
    secs(total) / n as f64
}

fn hardware_note() -> String {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{} {} with {threads} hardware threads, {MODE} build",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

pub fn measure(cfg: &Config, seed: Option<u64>, n: usize) -> Result<MetricsReport, CliError> {
    if n == 0 {
        return Err(CliError::new(Exit::Usage, "InvalidArgument", "--records must be at least 1"));
    }
    let data_seed = seed.unwrap_or(0);
    let params = cfg.he_params()?;
    let mode = cfg.weight_mode()?;
    let bundle = keygen(&params, seed)?;
    let ctx = CkksContext::new(params.clone())?;
    let key = sym_keygen(seed.map(|s| s.wrapping_add(1)));
    let train = Dataset {
        records: synthetic_records(TRAINING_RECORDS, data_seed),
        labels: None,
    };
    let mut train_cfg = cfg.train_config(seed);
    train_cfg.forest = None;
    let weights = train_model(&train, &train_cfg)?.weights;
    let model = encrypt_model(&weights, &ctx, &bundle.public_key, mode)?;

    let dir = tempfile::tempdir()?;
    let exchange = Exchange::new(dir.path());
    let mut ledger = Ledger::open(&dir.path().join("ledger.bin"))?;
    let client = Client {
        ctx: &ctx,
        public_key: &bundle.public_key,
        key: &key,
        exchange: &exchange,
    };
    let server = Server {
        ctx: &ctx,
        eval_keys: &bundle.eval_keys,
        model: &model,
        key: &key,
        exchange: &exchange,
    };
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    let claims = synthetic_records(n, data_seed.wrapping_add(1));

    let mut enc = Duration::ZERO;
    let mut processing = Duration::ZERO;
    let mut dec = Duration::ZERO;
    let mut envelope_bytes = 0usize;
    let mut plain_bytes = 0usize;
    for record in &claims {
        let features = weights.norm_stats.preprocess(record)?;
        let start = Instant::now();
        let pt = ctx.encode(&features, ctx.max_level(), ctx.default_scale())?;
        let ct = ctx.encrypt(&pt, &bundle.public_key, &mut rng)?;
        let sealed = seal(&ct.to_bytes(), &key).to_bytes();
        enc += start.elapsed();
        envelope_bytes += sealed.len();
        plain_bytes += record.to_csv_line().len();

        let receipt = client.submit(record, &weights.norm_stats, &mut ledger, &mut rng)?;
        let start = Instant::now();
        server.process_claim(&receipt.claim_id, &mut ledger)?;
        processing += start.elapsed();
        let start = Instant::now();
        let outcome = client.retrieve(&receipt.claim_id, &bundle.secret_key, &mut ledger)?;
        dec += start.elapsed();
        if !outcome.verification.is_valid() {
            return Err(CliError::new(
                Exit::VerificationFailed,
                "BenchVerification",
                format!("claim {} failed verification: {}", receipt.claim_id, outcome.verification),
            ));
        }
    }

    // Ledger-only pass: two transactions per claim on a fresh chain.
    let mut contract_ledger = Ledger::open(&dir.path().join("contract.bin"))?;
    let mut logging = Duration::ZERO;
    for i in 0..n {
        let id = format!("bench-{i}");
        let data_hash = content_hash(format!("{id}/data").as_bytes());
        let result_hash = content_hash(format!("{id}/result").as_bytes());
        let start = Instant::now();
        contract_ledger.log_computation(&id, &data_hash, None)?;
        contract_ledger.log_computation(&id, &data_hash, Some(&result_hash))?;
        logging += start.elapsed();
    }
    let transactions = 2 * n;

    let report = MetricsReport {
        enc_time_per_record_s: mean(enc, n),
        claim_processing_s: mean(processing, n),
        dec_time_s: mean(dec, n),
        contract_exec_s: mean(logging, transactions),
        throughput_tps: transactions as f64 / secs(logging).max(f64::MIN_POSITIVE),
        storage_overhead_ratio: envelope_bytes as f64 / plain_bytes as f64,
        n_records: n,
        mode: MODE,
        params: ParamsEcho {
            ring_dimension: params.ring_dimension,
            modulus_bits: params.modulus_chain.iter().map(|q| 64 - q.leading_zeros()).collect(),
            special_bits: 64 - params.special_prime.leading_zeros(),
            scale_bits: params.scale_bits,
            weight_mode: mode.to_string(),
        },
        hardware: hardware_note(),
        reference: REFERENCE,
        notes: vec![
            format!(
                "Storage ratio {:.0}x against the published ~{}x: a CKKS ciphertext holds two ring elements of {} coefficients per prime, so a seven-field record expands by orders of magnitude at these parameters.",
                envelope_bytes as f64 / plain_bytes as f64,
                REFERENCE.storage_overhead_ratio,
                params.ring_dimension
            ),
            "Timings are wall-clock on this machine and are shown next to the published values for qualitative comparison only.".into(),
            "Contract time and throughput measure the local hash-chained ledger, not an Ethereum node.".into(),
        ],
    };
    Ok(report)
}

pub fn run(cfg: &Config, seed: Option<u64>, n: usize, out: &Out) -> Result<Exit, CliError> {
    let r = measure(cfg, seed, n)?;
    let rf = &r.reference;
    out.line(format!("System performance over {} claims ({})", r.n_records, r.hardware));
    out.line(format!("{:<36}{:>14}  {}", "Metric", "Measured", "Published"));
    let rows = [
        ("Data Encryption Time (s/record)", format!("{:.4}", r.enc_time_per_record_s), format!("~{}", rf.enc_time_per_record_s)),
        ("Claim Processing Time (s/claim)", format!("{:.4}", r.claim_processing_s), format!("~{}", rf.claim_processing_s)),
        ("Data Decryption Time (s/result)", format!("{:.4}", r.dec_time_s), format!("~{}", rf.dec_time_s)),
        ("Contract Execution Time (s)", format!("{:.6}", r.contract_exec_s), format!("~{}", rf.contract_exec_s)),
        ("Ledger Throughput (tx/s)", format!("{:.1}", r.throughput_tps), format!("~{}-{}", rf.throughput_tps.0, rf.throughput_tps.1)),
        ("Storage Overhead (x plaintext)", format!("{:.1}", r.storage_overhead_ratio), format!("~{}", rf.storage_overhead_ratio)),
    ];
    for (name, measured, published) in rows {
        out.line(format!("{name:<36}{measured:>14}  {published}"));
    }
    out.line(format!(
        "Parameters: N = {}, moduli {:?} bits, special {} bits, scale 2^{}, weights {}",
        r.params.ring_dimension, r.params.modulus_bits, r.params.special_bits, r.params.scale_bits, r.params.weight_mode
    ));
    for note in &r.notes {
        out.line(format!("Note: {note}"));
    }
    out.emit(&json!({ "action": "bench", "report": r }));
    Ok(Exit::Ok)
}
