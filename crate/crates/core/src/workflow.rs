//! Client and server roles over a shared exchange directory.
//!
//! The client encrypts a standardized record, seals it in an envelope,
//! drops it at `<claim_id>.request.bin.aes` and logs the ciphertext hash.
//! The server re-checks that hash against the ledger, scores the claim
//! homomorphically, writes `<claim_id>.result.bin.aes` and binds the result
//! hash. The client then verifies both hashes on the ledger before it
//! decrypts anything.
//!
//! Hashes are always taken over the serialized HE ciphertext, never over
//! envelope bytes, because envelope nonces are random.

use std::fs::{self, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use medclaim_ckks::{Ciphertext, CkksContext, EvalKeys, HeError, PublicKey, SecretKey};
use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::envelope::{content_hash, open_bytes, seal, EnvelopeError, SymmetricKey};
use crate::ledger::{InvalidReason, Ledger, LedgerError, Verification};
use crate::model::{decide, predict_encrypted, EncryptedModel, ModelError, NormStats, Verdict};
use crate::record::RawRecord;

pub const REQUEST_SUFFIX: &str = ".request.bin.aes";
pub const RESULT_SUFFIX: &str = ".result.bin.aes";
const LOCK_SUFFIX: &str = ".lock";

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("cannot write to exchange directory {path}: {source}")]
    ExchangeUnwritable { path: PathBuf, source: io::Error },
    #[error("claim {0}: request payload no longer matches the logged data hash")]
    StaleSubmission(String),
    #[error("claim {0}: result not yet available")]
    PendingResult(String),
    #[error("claim {0}: no request file in the exchange directory")]
    MissingRequest(String),
    #[error("claim {0}: ledger has a result but the result file is missing")]
    MissingResult(String),
    #[error("claim {0}: already being processed")]
    ClaimBusy(String),
    #[error("invalid claim id {0:?} (use ASCII letters, digits, '-' or '_')")]
    InvalidClaimId(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, WorkflowError>;

/// 128 random bits as 32 lowercase hex characters.
pub fn new_claim_id<R: RngCore>(rng: &mut R) -> String {
    let mut b = [0u8; 16];
    rng.fill_bytes(&mut b);
    hex::encode(b)
}

fn check_claim_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(WorkflowError::InvalidClaimId(id.to_string()))
    }
}

/// The shared drop directory.
#[derive(Debug, Clone)]
pub struct Exchange {
    dir: PathBuf,
}

impl Exchange {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn request_path(&self, claim_id: &str) -> PathBuf {
        self.dir.join(format!("{claim_id}{REQUEST_SUFFIX}"))
    }

    pub fn result_path(&self, claim_id: &str) -> PathBuf {
        self.dir.join(format!("{claim_id}{RESULT_SUFFIX}"))
    }

    /// Write-then-rename so readers never see a partial file.
    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let unwritable = |source| WorkflowError::ExchangeUnwritable {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("partial");
        fs::write(&tmp, bytes).map_err(unwritable)?;
        fs::rename(&tmp, path).map_err(unwritable)
    }

    fn lock(&self, claim_id: &str) -> Result<ClaimLock> {
        let path = self.dir.join(format!("{claim_id}{LOCK_SUFFIX}"));
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(ClaimLock(path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(WorkflowError::ClaimBusy(claim_id.to_string())),
            Err(e) => Err(e.into()),
        }
    }
}

/// Per-claim marker file; removed on drop.
struct ClaimLock(PathBuf);

impl Drop for ClaimLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubmissionReceipt {
    pub claim_id: String,
    pub data_hash: String,
    pub tx_hash: String,
    pub block_index: u64,
    pub request_path: PathBuf,
    pub ciphertext_bytes: usize,
    pub envelope_bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProcessReceipt {
    pub claim_id: String,
    pub result_hash: String,
    pub tx_hash: String,
    pub block_index: u64,
    pub result_path: PathBuf,
}

/// Result of one pending claim in a server pass.
#[derive(Debug)]
pub struct ProcessOutcome {
    pub claim_id: String,
    pub result: Result<ProcessReceipt>,
}

/// Client-visible result. Probability and verdict are withheld unless the
/// ledger verification is `Valid`.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub claim_id: String,
    pub probability: Option<f64>,
    pub verdict: Option<Verdict>,
    #[serde(serialize_with = "as_display")]
    pub verification: Verification,
}

fn as_display<S: serde::Serializer>(v: &Verification, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Hospital side: holds public HE material and the transport key.
pub struct Client<'a> {
    pub ctx: &'a CkksContext,
    pub public_key: &'a PublicKey,
    pub key: &'a SymmetricKey,
    pub exchange: &'a Exchange,
}

impl Client<'_> {
    /// Standardizes `record` with the training statistics, encrypts and
    /// submits it. The envelope is on disk before the ledger is touched. A
    /// claim id in the record is reused; otherwise a fresh one is drawn from
    /// `rng`.
    pub fn submit<R: RngCore>(
        &self,
        record: &RawRecord,
        stats: &NormStats,
        ledger: &mut Ledger,
        rng: &mut R,
    ) -> Result<SubmissionReceipt> {
        let features = stats.preprocess(record)?;
        let claim_id = match &record.claim_id {
            Some(id) => id.clone(),
            None => new_claim_id(rng),
        };
        check_claim_id(&claim_id)?;

        let pt = self.ctx.encode(&features, self.ctx.max_level(), self.ctx.default_scale())?;
        let ct = self.ctx.encrypt(&pt, self.public_key, rng)?;
        let payload = ct.to_bytes();
        let data_hash = content_hash(&payload);

        ledger.refresh()?;
        if let Ok(existing) = ledger.get_record(&claim_id) {
            if existing.data_hash != data_hash {
                return Err(LedgerError::DataHashConflict(claim_id).into());
            }
        }
        let envelope = seal(&payload, self.key).to_bytes();
        let request_path = self.exchange.request_path(&claim_id);
        self.exchange.write_atomic(&request_path, &envelope)?;
        let receipt = ledger.log_computation(&claim_id, &data_hash, None)?;
        Ok(SubmissionReceipt {
            claim_id,
            data_hash,
            tx_hash: receipt.tx_hash,
            block_index: receipt.block_index,
            request_path,
            ciphertext_bytes: payload.len(),
            envelope_bytes: envelope.len(),
        })
    }

    /// Verifies the claim's artifacts against the ledger and, only if they
    /// check out, decrypts and thresholds the score.
    pub fn retrieve(&self, claim_id: &str, secret_key: &SecretKey, ledger: &mut Ledger) -> Result<Outcome> {
        check_claim_id(claim_id)?;
        ledger.refresh()?;
        let record = ledger.get_record(claim_id)?;
        let result_path = self.exchange.result_path(claim_id);
        let result_env = match fs::read(&result_path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(match record.result_hash {
                    None => WorkflowError::PendingResult(claim_id.to_string()),
                    Some(_) => WorkflowError::MissingResult(claim_id.to_string()),
                });
            }
            Err(e) => return Err(e.into()),
        };
        let request_env = fs::read(self.exchange.request_path(claim_id))
            .map_err(|_| WorkflowError::MissingRequest(claim_id.to_string()))?;

        let check = verify_artifacts(claim_id, &request_env, &result_env, self.key, ledger);
        let Some(result_payload) = check.result_payload.filter(|_| check.verification.is_valid()) else {
            return Ok(Outcome {
                claim_id: claim_id.to_string(),
                probability: None,
                verdict: None,
                verification: check.verification,
            });
        };
        let ct = Ciphertext::from_bytes(&result_payload, self.ctx)?;
        let pt = self.ctx.decrypt(&ct, secret_key)?;
        // The cubic surrogate can leave [0, 1] for scores outside the fit
        // interval.
        let probability = self.ctx.decode(&pt)[0].clamp(0.0, 1.0);
        let decision = decide(probability)?;
        Ok(Outcome {
            claim_id: claim_id.to_string(),
            probability: Some(decision.probability),
            verdict: Some(decision.verdict),
            verification: Verification::Valid,
        })
    }
}

/// Outcome of checking a claim's two envelopes against the ledger.
#[derive(Debug, Clone)]
pub struct ArtifactCheck {
    pub verification: Verification,
    /// Inner HE bytes of the result, when its envelope authenticated.
    pub result_payload: Option<Vec<u8>>,
}

/// Opens both envelopes, hashes their HE payloads and asks the ledger.
/// Touches no files, so it can be run over in-memory mutations.
pub fn verify_artifacts(
    claim_id: &str,
    request_env: &[u8],
    result_env: &[u8],
    key: &SymmetricKey,
    ledger: &Ledger,
) -> ArtifactCheck {
    let tamper = ArtifactCheck {
        verification: Verification::Invalid(InvalidReason::EnvelopeTamper),
        result_payload: None,
    };
    let Ok(request) = open_bytes(request_env, key) else {
        return tamper;
    };
    let Ok(result) = open_bytes(result_env, key) else {
        return tamper;
    };
    let verification = ledger.verify_computation(claim_id, &content_hash(&request), &content_hash(&result));
    ArtifactCheck {
        verification,
        result_payload: Some(result),
    }
}

/// Insurer side: public evaluation keys, the encrypted model and the
/// transport key. There is no field for an HE secret key.
pub struct Server<'a> {
    pub ctx: &'a CkksContext,
    pub eval_keys: &'a EvalKeys,
    pub model: &'a EncryptedModel,
    pub key: &'a SymmetricKey,
    pub exchange: &'a Exchange,
}

impl Server<'_> {
    /// Processes every claim the ledger lists as awaiting a result.
    pub fn process_pending(&self, ledger: &mut Ledger) -> Result<Vec<ProcessOutcome>> {
        ledger.refresh()?;
        Ok(ledger
            .pending_claims()
            .into_iter()
            .map(|claim_id| {
                let result = self.process_claim(&claim_id, ledger);
                ProcessOutcome { claim_id, result }
            })
            .collect())
    }

    /// Scores one claim. The request hash is checked against the ledger
    /// before any computation; the ledger is completed only after the
    /// result file is in place.
    pub fn process_claim(&self, claim_id: &str, ledger: &mut Ledger) -> Result<ProcessReceipt> {
        check_claim_id(claim_id)?;
        let _lock = self.exchange.lock(claim_id)?;
        ledger.refresh()?;
        let record = match ledger.get_record(claim_id) {
            Ok(r) => r,
            Err(LedgerError::UnknownClaim(id)) => return Err(LedgerError::MissingDataLog(id).into()),
            Err(e) => return Err(e.into()),
        };
        if record.result_hash.is_some() {
            return Err(LedgerError::DuplicateResult(claim_id.to_string()).into());
        }
        let request_env = fs::read(self.exchange.request_path(claim_id))
            .map_err(|_| WorkflowError::MissingRequest(claim_id.to_string()))?;
        let payload = open_bytes(&request_env, self.key)?;
        if content_hash(&payload) != record.data_hash {
            return Err(WorkflowError::StaleSubmission(claim_id.to_string()));
        }

        let enc_x = Ciphertext::from_bytes(&payload, self.ctx)?;
        let enc_score = predict_encrypted(self.ctx, &enc_x, self.model, self.eval_keys)?;
        let result = enc_score.to_bytes();
        let result_hash = content_hash(&result);
        let result_path = self.exchange.result_path(claim_id);
        self.exchange.write_atomic(&result_path, &seal(&result, self.key).to_bytes())?;
        let receipt = ledger.log_computation(claim_id, &record.data_hash, Some(&result_hash))?;
        Ok(ProcessReceipt {
            claim_id: claim_id.to_string(),
            result_hash,
            tx_hash: receipt.tx_hash,
            block_index: receipt.block_index,
            result_path,
        })
    }
}
