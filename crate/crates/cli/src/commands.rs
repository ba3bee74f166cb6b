use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use medclaim_ckks::{keygen as he_keygen, CkksContext, KeyBundle, PublicContext};
use medclaim_core::dataset::{synthetic_records, Dataset};
use medclaim_core::envelope::{sym_keygen, SymmetricKey};
use medclaim_core::ledger::{self, ChainStatus, Ledger, LedgerError, Transaction, TxOp};
use medclaim_core::model::{encrypt_model, EncryptedModel, ModelWeights, WeightMode};
use medclaim_core::training::train_model;
use medclaim_core::workflow::{Client, Exchange, Server, WorkflowError};
use medclaim_core::RawRecord;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use crate::config::Config;
use crate::error::{CliError, Exit};
use crate::output::Out;

pub struct SubmitInput {
    pub record: Option<RawRecord>,
    pub claim_id: Option<String>,
    pub policy_id: Option<String>,
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_artifact(path: &Path, hint: &str) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CliError::missing_artifact(path, hint),
        _ => e.into(),
    })
}

pub(crate) fn load_public(cfg: &Config) -> Result<(PublicContext, CkksContext), CliError> {
    let bytes = read_artifact(&cfg.paths.public_context, "run `medclaim keygen` first")?;
    let public = PublicContext::from_bytes(&bytes)?;
    let ctx = CkksContext::new(public.params.clone())?;
    Ok((public, ctx))
}

fn load_private(cfg: &Config) -> Result<(KeyBundle, CkksContext), CliError> {
    let bytes = read_artifact(&cfg.paths.private_context, "run `medclaim keygen` first")?;
    let bundle = KeyBundle::from_bytes(&bytes)?;
    let ctx = CkksContext::new(bundle.params.clone())?;
    Ok((bundle, ctx))
}

fn load_key(cfg: &Config) -> Result<SymmetricKey, CliError> {
    let bytes = read_artifact(&cfg.paths.aes_key, "run `medclaim keygen` first")?;
    Ok(SymmetricKey::from_bytes(&bytes)?)
}

fn open_exchange(cfg: &Config) -> Result<Exchange, CliError> {
    fs::create_dir_all(&cfg.paths.exchange).map_err(|e| {
        CliError::new(
            Exit::CryptoOrLedger,
            "ExchangeUnwritable",
            format!("cannot create {}: {e}", cfg.paths.exchange.display()),
        )
    })?;
    Ok(Exchange::new(&cfg.paths.exchange))
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

pub fn keygen(cfg: &Config, seed: Option<u64>, force: bool, out: &Out) -> Result<Exit, CliError> {
    let paths = &cfg.paths;
    let targets = [&paths.private_context, &paths.public_context, &paths.aes_key];
    if !force {
        if let Some(existing) = targets.iter().find(|p| p.exists()) {
            return Err(CliError::file_exists(existing));
        }
    }
    let params = cfg.he_params()?;
    let bundle = he_keygen(&params, seed)?;
    // Offset so the transport key never shares a stream with the HE keys.
    let key = sym_keygen(seed.map(|s| s.wrapping_add(1)));
    fs::write(&paths.private_context, bundle.to_bytes())?;
    fs::write(&paths.public_context, bundle.public_context().to_bytes())?;
    key.save(&paths.aes_key)?;

    let params_id = hex(&params.id().0);
    out.line(format!(
        "Generated CKKS keys: N = {}, {} levels, scale 2^{} (params id {params_id})",
        params.ring_dimension,
        params.max_level(),
        params.scale_bits
    ));
    for p in targets {
        out.line(format!("- {}", p.display()));
    }
    out.emit(&json!({
        "action": "keygen",
        "params_id": params_id,
        "ring_dimension": params.ring_dimension,
        "max_level": params.max_level(),
        "files": targets.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }));
    Ok(Exit::Ok)
}

pub fn train(
    cfg: &Config,
    seed: Option<u64>,
    data: Option<&Path>,
    synthetic: Option<usize>,
    mode: WeightMode,
    out: &Out,
) -> Result<Exit, CliError> {
    let ds = match (data, synthetic) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(CliError::missing_artifact(path, "pass an existing CSV file"));
            }
            Dataset::read_path(path)?
        }
        (None, Some(n)) => Dataset {
            records: synthetic_records(n, seed.unwrap_or(0)),
            labels: None,
        },
        (None, None) => return Err(CliError::usage("pass --data or --synthetic")),
    };
    let (public, ctx) = load_public(cfg)?;
    let report = train_model(&ds, &cfg.train_config(seed))?;
    let model = encrypt_model(&report.weights, &ctx, &public.public_key, mode)?;
    report.weights.save(&cfg.paths.model)?;
    fs::write(&cfg.paths.encrypted_model, model.to_bytes())?;

    let w = &report.weights;
    out.line(format!("Records: {} train, {} test", report.n_train, report.n_test));
    out.line(format!("Logistic regression accuracy: train {:.4}, test {:.4}", report.train_accuracy, report.test_accuracy));
    out.line(format!("Cubic-sigmoid surrogate test accuracy: {:.4}", report.surrogate_test_accuracy));
    if let Some(acc) = report.forest_test_accuracy {
        out.line(format!("Random forest baseline test accuracy: {acc:.4}"));
    }
    out.line(format!(
        "Sigmoid fit on [-{b}, {b}]: {:.6} + {:.6} z + {:.6} z^3 (max error {:.4})",
        w.sigmoid.c0,
        w.sigmoid.c1,
        w.sigmoid.c3,
        w.sigmoid.max_err,
        b = w.sigmoid.interval
    ));
    out.line(format!(
        "Scores outside [-{0}, {0}]: {1:.2}%",
        w.sigmoid.interval - 1.0,
        100.0 * report.outside_fit_fraction
    ));
    out.line(format!("Weights ({mode}) saved to {} and {}", cfg.paths.model.display(), cfg.paths.encrypted_model.display()));
    out.emit(&json!({
        "action": "train",
        "weight_mode": mode.to_string(),
        "report": report,
        "sigmoid": w.sigmoid,
        "model_path": cfg.paths.model.display().to_string(),
        "encrypted_model_path": cfg.paths.encrypted_model.display().to_string(),
    }));
    Ok(Exit::Ok)
}

/// Reads one field, re-asking until the answer parses and passes `check`.
fn prompt_field<T, R: BufRead>(
    input: &mut R,
    sink: &mut dyn Write,
    label: &str,
    check: impl Fn(&T) -> bool,
) -> Result<T, CliError>
where
    T: std::str::FromStr,
{
    loop {
        write!(sink, "{label}")?;
        sink.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(CliError::usage("input ended before all fields were entered"));
        }
        match line.trim().parse::<T>() {
            Ok(v) if check(&v) => return Ok(v),
            _ => writeln!(sink, "Invalid value, try again.")?,
        }
    }
}

fn prompt_record<R: BufRead>(input: &mut R, sink: &mut dyn Write) -> Result<RawRecord, CliError> {
    writeln!(sink, "Enter the following details:")?;
    let age = prompt_field(input, sink, "Age: ", |_: &u32| true)?;
    let sex = prompt_field(input, sink, "Sex (0 = female, 1 = male): ", |v: &u8| *v <= 1)?;
    let bmi = prompt_field(input, sink, "BMI: ", |v: &f64| v.is_finite() && *v > 0.0)?;
    let children = prompt_field(input, sink, "Number of children: ", |_: &u32| true)?;
    let smoker = prompt_field(input, sink, "Smoker (0 = no, 1 = yes): ", |v: &u8| *v <= 1)?;
    let region = prompt_field(
        input,
        sink,
        "Region (0 = southwest, 1 = southeast, 2 = northwest, 3 = northeast): ",
        |v: &u8| *v <= 3,
    )?;
    let charges = prompt_field(input, sink, "Recent medical charges: ", |v: &f64| v.is_finite() && *v >= 0.0)?;
    Ok(RawRecord::new(age, sex, bmi, children, smoker, region, charges))
}

pub fn submit(cfg: &Config, seed: Option<u64>, input: SubmitInput, out: &Out) -> Result<Exit, CliError> {
    out.line("=== ENCRYPTION MODE ===");
    let mut record = match input.record {
        Some(r) => r,
        None => {
            let stdin = io::stdin();
            let mut lock = stdin.lock();
            if out.is_json() {
                prompt_record(&mut lock, &mut io::stderr())?
            } else {
                prompt_record(&mut lock, &mut io::stdout())?
            }
        }
    };
    record.claim_id = input.claim_id;
    record.policy_id = input.policy_id;

    let (public, ctx) = load_public(cfg)?;
    let weights = ModelWeights::load(&cfg.paths.model).map_err(|e| match e {
        medclaim_core::model::ModelError::Io(io) if io.kind() == io::ErrorKind::NotFound => {
            CliError::missing_artifact(&cfg.paths.model, "run `medclaim train` first")
        }
        other => other.into(),
    })?;
    let key = load_key(cfg)?;
    let exchange = open_exchange(cfg)?;
    let mut ledger = Ledger::open(&cfg.paths.ledger)?;
    let mut rng = rng_from(seed);

    let client = Client {
        ctx: &ctx,
        public_key: &public.public_key,
        key: &key,
        exchange: &exchange,
    };
    let receipt = client.submit(&record, &weights.norm_stats, &mut ledger, &mut rng)?;
    fs::copy(&receipt.request_path, &cfg.paths.local_request)?;

    out.line(format!("Claim ID: {}", receipt.claim_id));
    out.line(format!("Blockchain TX Hash: {}", receipt.tx_hash));
    out.line("");
    out.line("Encryption complete. Files saved:");
    for p in [
        &cfg.paths.private_context,
        &cfg.paths.public_context,
        &cfg.paths.local_request,
        &cfg.paths.aes_key,
    ] {
        out.line(format!("- {}", p.display()));
    }
    out.emit(&json!({
        "action": "submit",
        "claim_id": receipt.claim_id,
        "policy_id": record.policy_id,
        "tx_hash": receipt.tx_hash,
        "block_index": receipt.block_index,
        "data_hash": receipt.data_hash,
        "request_path": receipt.request_path.display().to_string(),
        "ciphertext_bytes": receipt.ciphertext_bytes,
        "envelope_bytes": receipt.envelope_bytes,
    }));
    Ok(Exit::Ok)
}

pub fn process(cfg: &Config, claim_id: Option<&str>, out: &Out) -> Result<Exit, CliError> {
    out.line("=== SERVER PROCESSING ===");
    let (public, ctx) = load_public(cfg)?;
    let model_bytes = read_artifact(&cfg.paths.encrypted_model, "run `medclaim train` first")?;
    let model = EncryptedModel::from_bytes(&model_bytes, &ctx)?;
    let key = load_key(cfg)?;
    let exchange = open_exchange(cfg)?;
    let mut ledger = Ledger::open(&cfg.paths.ledger)?;
    let server = Server {
        ctx: &ctx,
        eval_keys: &public.eval_keys,
        model: &model,
        key: &key,
        exchange: &exchange,
    };

    let results = match claim_id {
        Some(id) => vec![(id.to_string(), server.process_claim(id, &mut ledger))],
        None => server
            .process_pending(&mut ledger)?
            .into_iter()
            .map(|o| (o.claim_id, o.result))
            .collect(),
    };
    if results.is_empty() {
        out.line("No pending claims.");
    }

    let mut worst = Exit::Ok;
    for (id, result) in results {
        match result {
            Ok(r) => {
                out.line(format!("Claim ID: {id}"));
                out.line(format!("Blockchain TX Hash: {}", r.tx_hash));
                out.line(format!("Computation complete. Encrypted result saved to {}", r.result_path.display()));
                out.emit(&json!({
                    "action": "process",
                    "claim_id": id,
                    "ok": true,
                    "tx_hash": r.tx_hash,
                    "block_index": r.block_index,
                    "result_hash": r.result_hash,
                    "result_path": r.result_path.display().to_string(),
                }));
            }
            Err(e) => {
                let err = CliError::from(e);
                eprintln!("claim {id}: {err}");
                out.emit(&json!({
                    "action": "process",
                    "claim_id": id,
                    "ok": false,
                    "kind": err.kind,
                    "message": err.message,
                }));
                worst = worse(worst, err.exit);
            }
        }
    }
    Ok(worst)
}

fn worse(a: Exit, b: Exit) -> Exit {
    if b as u8 > a as u8 {
        b
    } else {
        a
    }
}

/// Most recent claim with a data log.
fn latest_claim(ledger: &Ledger) -> Option<String> {
    ledger
        .blocks()
        .iter()
        .rev()
        .filter_map(|b| Transaction::decode(&b.payload).ok())
        .find(|tx| tx.op == TxOp::LogData)
        .map(|tx| tx.claim_id)
}

pub fn retrieve(cfg: &Config, claim_id: Option<&str>, out: &Out) -> Result<Exit, CliError> {
    out.line("=== DECRYPTION MODE ===");
    let (bundle, ctx) = load_private(cfg)?;
    let key = load_key(cfg)?;
    let exchange = Exchange::new(&cfg.paths.exchange);
    if !cfg.paths.ledger.exists() {
        return Err(CliError::missing_artifact(&cfg.paths.ledger, "submit a claim first"));
    }
    let mut ledger = Ledger::open(&cfg.paths.ledger)?;
    let claim_id = match claim_id {
        Some(id) => id.to_string(),
        None => latest_claim(&ledger).ok_or_else(|| CliError::usage("the ledger holds no claims yet"))?,
    };
    let client = Client {
        ctx: &ctx,
        public_key: &bundle.public_key,
        key: &key,
        exchange: &exchange,
    };
    let outcome = match client.retrieve(&claim_id, &bundle.secret_key, &mut ledger) {
        Err(WorkflowError::Ledger(LedgerError::UnknownClaim(id))) => {
            return Err(CliError::usage(format!("unknown claim {id}")));
        }
        other => other?,
    };
    let result_path = exchange.result_path(&claim_id);
    if outcome.verification.is_valid() {
        fs::copy(&result_path, &cfg.paths.local_result)?;
    }

    if let (Some(p), Some(v)) = (outcome.probability, outcome.verdict) {
        out.line(format!("Model output (probability): {p:.4}"));
        out.line(format!("Claim {v}"));
        out.line("");
    }
    out.line(format!("Blockchain Verification: {}", outcome.verification));
    out.emit(&json!({
        "action": "retrieve",
        "claim_id": outcome.claim_id,
        "probability": outcome.probability,
        "verdict": outcome.verdict,
        "verification": outcome.verification.to_string(),
    }));
    Ok(if outcome.verification.is_valid() {
        Exit::Ok
    } else {
        Exit::VerificationFailed
    })
}

fn require_ledger(cfg: &Config) -> Result<&Path, CliError> {
    let path = cfg.paths.ledger.as_path();
    if path.exists() {
        Ok(path)
    } else {
        Err(CliError::missing_artifact(path, "submit a claim first"))
    }
}

pub fn ledger_show(cfg: &Config, out: &Out) -> Result<Exit, CliError> {
    let ledger = Ledger::open(require_ledger(cfg)?)?;
    for b in ledger.blocks() {
        let tx = if b.payload.is_empty() {
            None
        } else {
            Some(Transaction::decode(&b.payload).map_err(|reason| LedgerError::CorruptLedger { index: b.index, reason })?)
        };
        match &tx {
            None => out.line(format!("#{} genesis  hash {}", b.index, b.hash_hex())),
            Some(tx) => {
                out.line(format!("#{} {}  claim {}  tx {}", b.index, tx.op, tx.claim_id, tx.tx_hash()));
                out.line(format!("    data   {}", tx.data_hash));
                if let Some(r) = &tx.result_hash {
                    out.line(format!("    result {r}"));
                }
                out.line(format!("    time {}  hash {}", b.timestamp, b.hash_hex()));
            }
        }
        out.emit(&json!({
            "action": "ledger_block",
            "index": b.index,
            "timestamp": b.timestamp,
            "block_hash": b.hash_hex(),
            "prev_hash": b.prev_hash_hex(),
            "op": tx.as_ref().map(|t| t.op.to_string()),
            "claim_id": tx.as_ref().map(|t| t.claim_id.clone()),
            "data_hash": tx.as_ref().map(|t| t.data_hash.clone()),
            "result_hash": tx.as_ref().and_then(|t| t.result_hash.clone()),
            "tx_hash": tx.as_ref().map(|t| t.tx_hash()),
        }));
    }
    Ok(Exit::Ok)
}

pub fn ledger_verify(cfg: &Config, out: &Out) -> Result<Exit, CliError> {
    let status = match ledger::verify_file(require_ledger(cfg)?) {
        Ok(s) => s,
        Err(LedgerError::BadHeader(reason)) => ChainStatus::Invalid {
            index: 0,
            reason: format!("file header: {reason}"),
        },
        Err(e) => return Err(e.into()),
    };
    let (exit, value) = match &status {
        ChainStatus::Valid { blocks } => {
            out.line(format!("Ledger valid: {blocks} blocks"));
            (
                Exit::Ok,
                json!({"action": "ledger_verify", "valid": true, "blocks": blocks, "first_bad_index": null, "reason": null}),
            )
        }
        ChainStatus::Invalid { index, reason } => {
            out.line(format!("Ledger invalid at block {index}: {reason}"));
            (
                Exit::VerificationFailed,
                json!({"action": "ledger_verify", "valid": false, "blocks": null, "first_bad_index": index, "reason": reason}),
            )
        }
    };
    out.emit(&value);
    Ok(exit)
}
