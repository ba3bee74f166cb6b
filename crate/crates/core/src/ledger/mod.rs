//! Append-only, hash-chained attestation ledger.
//!
//! Each `log_computation` call becomes one transaction in one new block.
//! A claim's first transaction records the hash of its encrypted request;
//! the second binds the hash of the encrypted result. Verification checks
//! both hashes and that the data transaction precedes the result.
//!
//! File layout: `"LGR1" | version u16 LE | (block_len u32 LE | block)*`.

mod block;
mod tx;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

pub use block::{Block, GENESIS_PREV, HASH_LEN};
use block::Cursor;
pub use tx::{tx_hash_of, Transaction, TxOp};

pub const MAGIC: &[u8; 4] = b"LGR1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 6;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("ledger corrupt at block {index}: {reason}")]
    CorruptLedger { index: u64, reason: String },
    #[error("not a ledger file: {0}")]
    BadHeader(String),
    #[error("claim {0}: result logged before any data log")]
    MissingDataLog(String),
    #[error("claim {0}: result already bound")]
    DuplicateResult(String),
    #[error("claim {0}: data hash differs from the one on record")]
    DataHashConflict(String),
    #[error("unknown claim {0}")]
    UnknownClaim(String),
    #[error("malformed hash {0:?} (expected 64 lowercase hex characters)")]
    InvalidHash(String),
    #[error("invalid claim id {0:?}")]
    InvalidClaimId(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Why a computation failed verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InvalidReason {
    UnknownClaim,
    DataHashMismatch,
    ResultHashMismatch,
    PendingResult,
    OrderViolation,
    /// An envelope failed authentication before hashes could be compared;
    /// produced by callers that open envelopes, never by the ledger itself.
    EnvelopeTamper,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Valid,
    Invalid(InvalidReason),
}

impl Verification {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verification::Valid)
    }
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verification::Valid => f.write_str("Valid"),
            Verification::Invalid(r) => write!(f, "Invalid({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainStatus {
    Valid { blocks: u64 },
    Invalid { index: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxReceipt {
    pub tx_hash: String,
    pub block_index: u64,
    pub timestamp: u64,
}

/// Public view of a claim's attestation state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ComputationRecord {
    pub claim_id: String,
    pub data_hash: String,
    pub result_hash: Option<String>,
    pub ts_data: u64,
    pub ts_result: Option<u64>,
}

enum Plan {
    /// Identical data log already on chain; nothing to append.
    Existing(TxReceipt),
    Append(Transaction),
}

#[derive(Debug, Clone, Default)]
struct RecordState {
    data: Option<(String, TxReceipt)>,
    result: Option<(String, TxReceipt)>,
}

impl RecordState {
    fn public(&self, claim_id: &str) -> Option<ComputationRecord> {
        let (data_hash, data_rx) = self.data.as_ref()?;
        Some(ComputationRecord {
            claim_id: claim_id.to_string(),
            data_hash: data_hash.clone(),
            result_hash: self.result.as_ref().map(|(h, _)| h.clone()),
            ts_data: data_rx.timestamp,
            ts_result: self.result.as_ref().map(|(_, r)| r.timestamp),
        })
    }
}

pub fn is_hex_hash(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

fn check_hash(s: &str) -> Result<(), LedgerError> {
    if is_hex_hash(s) {
        Ok(())
    } else {
        Err(LedgerError::InvalidHash(s.to_string()))
    }
}

fn wall_clock_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Parses and checks blocks starting at `cursor`, continuing the chain
/// after `prev` (or from genesis when `prev` is `None`). Errors carry the
/// index of the block being read when the problem was found.
fn parse_blocks(cursor: &mut Cursor<'_>, prev: Option<&Block>) -> Result<Vec<Block>, (u64, String)> {
    let mut out: Vec<Block> = Vec::new();
    let mut expected = prev.map_or(0, |b| b.index + 1);
    let mut prev_hash = prev.map_or(GENESIS_PREV, |b| b.block_hash);
    while cursor.remaining() > 0 {
        let fail = |reason: String| (expected, reason);
        let len = cursor.u32().map_err(fail)? as usize;
        let raw = cursor.take(len).map_err(fail)?;
        let block = Block::from_bytes(raw).map_err(fail)?;
        if block.index != expected {
            return Err(fail(format!("index field {} out of sequence", block.index)));
        }
        if block.prev_hash != prev_hash {
            return Err(fail("prev_hash does not match predecessor".into()));
        }
        if block.compute_hash() != block.block_hash {
            return Err(fail("block hash mismatch".into()));
        }
        if expected == 0 {
            if !block.payload.is_empty() {
                return Err(fail("genesis block carries a payload".into()));
            }
        } else {
            Transaction::decode(&block.payload).map_err(fail)?;
        }
        prev_hash = block.block_hash;
        expected += 1;
        out.push(block);
    }
    Ok(out)
}

fn check_header(bytes: &[u8]) -> Result<(), LedgerError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(LedgerError::BadHeader("missing LGR1 magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(LedgerError::BadHeader(format!("unsupported version {version}")));
    }
    Ok(())
}

/// Checks a complete ledger image: header, framing, back-links and block
/// hashes. Reports the first block found inconsistent.
pub fn verify_bytes(bytes: &[u8]) -> Result<ChainStatus, LedgerError> {
    check_header(bytes)?;
    let mut cursor = Cursor {
        bytes,
        pos: HEADER_LEN,
    };
    Ok(match parse_blocks(&mut cursor, None) {
        Ok(blocks) if blocks.is_empty() => ChainStatus::Invalid {
            index: 0,
            reason: "no genesis block".into(),
        },
        Ok(blocks) => ChainStatus::Valid {
            blocks: blocks.len() as u64,
        },
        Err((index, reason)) => ChainStatus::Invalid { index, reason },
    })
}

pub fn verify_file(path: &Path) -> Result<ChainStatus, LedgerError> {
    verify_bytes(&std::fs::read(path)?)
}

fn encode_framed(block: &Block, out: &mut Vec<u8>) {
    let raw = block.to_bytes();
    out.extend_from_slice(&(raw.len() as u32).to_le_bytes());
    out.extend_from_slice(&raw);
}

/// Writes a complete ledger image. Meant for tooling and fixtures; normal
/// appends go through [`Ledger::log_computation`].
pub fn write_ledger_file(path: &Path, blocks: &[Block]) -> io::Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for b in blocks {
        encode_framed(b, &mut out);
    }
    std::fs::write(path, out)
}

/// Handle on a ledger file. Appends take an exclusive OS file lock and
/// first pick up blocks other processes appended, so several handles (even
/// across processes) serialize cleanly.
#[derive(Debug)]
pub struct Ledger {
    path: PathBuf,
    blocks: Vec<Block>,
    records: BTreeMap<String, RecordState>,
    synced_len: u64,
}

impl Ledger {
    /// Opens `path`, creating it with a genesis block if absent. An
    /// existing file is fully verified.
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        match OpenOptions::new().write(true).create_new(true).open(path) {
            Ok(file) => {
                file.lock()?;
                let now = wall_clock_ms();
                let genesis = Block::sealed(0, GENESIS_PREV, Vec::new(), now, now);
                let mut out = Vec::new();
                out.extend_from_slice(MAGIC);
                out.extend_from_slice(&VERSION.to_le_bytes());
                encode_framed(&genesis, &mut out);
                (&file).write_all(&out)?;
                file.sync_data()?;
                file.unlock()?;
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {}
            Err(e) => return Err(e.into()),
        }
        let mut ledger = Self {
            path: path.to_path_buf(),
            blocks: Vec::new(),
            records: BTreeMap::new(),
            synced_len: 0,
        };
        let file = File::open(path)?;
        file.lock_shared()?;
        let result = ledger.sync_from(&file);
        file.unlock()?;
        result?;
        Ok(ledger)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Re-reads blocks appended since the last sync.
    pub fn refresh(&mut self) -> Result<(), LedgerError> {
        let file = File::open(&self.path)?;
        file.lock_shared()?;
        let result = self.sync_from(&file);
        file.unlock()?;
        result
    }

    fn sync_from(&mut self, mut file: &File) -> Result<(), LedgerError> {
        let len = file.metadata()?.len();
        if len < self.synced_len {
            return Err(LedgerError::CorruptLedger {
                index: self.blocks.len() as u64,
                reason: "file shrank".into(),
            });
        }
        if len == self.synced_len {
            return Ok(());
        }
        let mut bytes = Vec::with_capacity((len - self.synced_len) as usize);
        if self.synced_len == 0 {
            file.read_to_end(&mut bytes)?;
            check_header(&bytes)?;
        } else {
            file.seek(SeekFrom::Start(self.synced_len))?;
            file.read_to_end(&mut bytes)?;
        }
        let start = if self.synced_len == 0 { HEADER_LEN } else { 0 };
        let mut cursor = Cursor { bytes: &bytes, pos: start };
        let new_blocks = parse_blocks(&mut cursor, self.blocks.last())
            .map_err(|(index, reason)| LedgerError::CorruptLedger { index, reason })?;
        if self.blocks.is_empty() && new_blocks.is_empty() {
            return Err(LedgerError::CorruptLedger {
                index: 0,
                reason: "no genesis block".into(),
            });
        }
        for b in new_blocks {
            self.apply(&b);
            self.blocks.push(b);
        }
        self.synced_len += bytes.len() as u64;
        Ok(())
    }

    /// Folds a (hash-verified) block into the record index. Replay is
    /// lenient about transaction order so that verification, not parsing,
    /// reports ordering problems.
    fn apply(&mut self, block: &Block) {
        if block.index == 0 {
            return;
        }
        let tx = Transaction::decode(&block.payload).expect("payload checked during parse");
        let receipt = TxReceipt {
            tx_hash: tx_hash_of(&block.payload),
            block_index: block.index,
            timestamp: block.timestamp,
        };
        let state = self.records.entry(tx.claim_id).or_default();
        match tx.op {
            TxOp::LogData => {
                if state.data.is_none() {
                    state.data = Some((tx.data_hash, receipt));
                }
            }
            TxOp::LogResult => {
                if state.result.is_none() {
                    state.result = Some((tx.result_hash.expect("checked by decode"), receipt));
                }
            }
        }
    }

    /// Records a data hash (`result_hash = None`) or binds a result hash to
    /// an existing data log.
    pub fn log_computation(
        &mut self,
        claim_id: &str,
        data_hash: &str,
        result_hash: Option<&str>,
    ) -> Result<TxReceipt, LedgerError> {
        if claim_id.is_empty() || claim_id.chars().any(char::is_control) {
            return Err(LedgerError::InvalidClaimId(claim_id.to_string()));
        }
        check_hash(data_hash)?;
        if let Some(r) = result_hash {
            check_hash(r)?;
        }

        let mut file = OpenOptions::new().read(true).append(true).open(&self.path)?;
        file.lock()?;
        let result = self
            .sync_from(&file)
            .and_then(|()| self.plan(claim_id, data_hash, result_hash))
            .and_then(|plan| match plan {
                Plan::Existing(receipt) => Ok(receipt),
                Plan::Append(tx) => self.append(&mut file, &tx),
            });
        file.unlock()?;
        result
    }

    fn plan(&self, claim_id: &str, data_hash: &str, result_hash: Option<&str>) -> Result<Plan, LedgerError> {
        let state = self.records.get(claim_id);
        let data = state.and_then(|s| s.data.as_ref());
        let Some(result_hash) = result_hash else {
            return match data {
                Some((existing, receipt)) if existing == data_hash => Ok(Plan::Existing(receipt.clone())),
                Some(_) => Err(LedgerError::DataHashConflict(claim_id.to_string())),
                None => Ok(Plan::Append(Transaction {
                    claim_id: claim_id.to_string(),
                    data_hash: data_hash.to_string(),
                    result_hash: None,
                    op: TxOp::LogData,
                })),
            };
        };
        let (existing, _) = data.ok_or_else(|| LedgerError::MissingDataLog(claim_id.to_string()))?;
        if existing != data_hash {
            return Err(LedgerError::DataHashConflict(claim_id.to_string()));
        }
        if state.is_some_and(|s| s.result.is_some()) {
            return Err(LedgerError::DuplicateResult(claim_id.to_string()));
        }
        Ok(Plan::Append(Transaction {
            claim_id: claim_id.to_string(),
            data_hash: data_hash.to_string(),
            result_hash: Some(result_hash.to_string()),
            op: TxOp::LogResult,
        }))
    }

    fn append(&mut self, file: &mut File, tx: &Transaction) -> Result<TxReceipt, LedgerError> {
        let last = self.blocks.last().expect("genesis present");
        let wall = wall_clock_ms();
        let block = Block::sealed(last.index + 1, last.block_hash, tx.encode(), wall.max(last.timestamp), wall);
        let mut framed = Vec::new();
        encode_framed(&block, &mut framed);
        file.write_all(&framed)?;
        file.sync_data()?;
        self.synced_len += framed.len() as u64;
        let receipt = TxReceipt {
            tx_hash: tx_hash_of(&block.payload),
            block_index: block.index,
            timestamp: block.timestamp,
        };
        self.apply(&block);
        self.blocks.push(block);
        Ok(receipt)
    }

    /// Valid iff the claim's data hash and result hash both match and the
    /// data log precedes the result log in chain order and time.
    pub fn verify_computation(&self, claim_id: &str, data_hash: &str, result_hash: &str) -> Verification {
        use InvalidReason::*;
        let Some(state) = self.records.get(claim_id) else {
            return Verification::Invalid(UnknownClaim);
        };
        let Some((stored_data, data_rx)) = &state.data else {
            return Verification::Invalid(OrderViolation);
        };
        if stored_data != data_hash {
            return Verification::Invalid(DataHashMismatch);
        }
        let Some((stored_result, result_rx)) = &state.result else {
            return Verification::Invalid(PendingResult);
        };
        if stored_result != result_hash {
            return Verification::Invalid(ResultHashMismatch);
        }
        if data_rx.block_index >= result_rx.block_index || data_rx.timestamp > result_rx.timestamp {
            return Verification::Invalid(OrderViolation);
        }
        Verification::Valid
    }

    /// Recomputes every hash and back-link of the loaded chain.
    pub fn verify_chain(&self) -> ChainStatus {
        let mut prev_hash = GENESIS_PREV;
        for (i, b) in self.blocks.iter().enumerate() {
            let index = i as u64;
            if b.index != index || b.prev_hash != prev_hash || b.compute_hash() != b.block_hash {
                return ChainStatus::Invalid {
                    index,
                    reason: "hash or link mismatch".into(),
                };
            }
            prev_hash = b.block_hash;
        }
        ChainStatus::Valid {
            blocks: self.blocks.len() as u64,
        }
    }

    pub fn get_record(&self, claim_id: &str) -> Result<ComputationRecord, LedgerError> {
        self.records
            .get(claim_id)
            .and_then(|s| s.public(claim_id))
            .ok_or_else(|| LedgerError::UnknownClaim(claim_id.to_string()))
    }

    /// Claims with a data log but no result yet, in claim-id order.
    pub fn pending_claims(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|(_, s)| s.data.is_some() && s.result.is_none())
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }
}
