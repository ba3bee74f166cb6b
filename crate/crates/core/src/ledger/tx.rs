use std::fmt;

use sha2::{Digest, Sha256};

use super::block::Cursor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOp {
    /// First log of a claim: data hash only.
    LogData,
    /// Second log: binds the result hash.
    LogResult,
}

impl TxOp {
    fn tag(self) -> &'static str {
        match self {
            TxOp::LogData => "log_data",
            TxOp::LogResult => "log_result",
        }
    }
}

impl fmt::Display for TxOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A `logComputation` call as stored in a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub claim_id: String,
    pub data_hash: String,
    pub result_hash: Option<String>,
    pub op: TxOp,
}

impl Transaction {
    /// Canonical form: four `u32`-length-prefixed UTF-8 fields in the order
    /// claim id, data hash, result hash (empty when absent), op tag.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for field in [
            self.claim_id.as_str(),
            self.data_hash.as_str(),
            self.result_hash.as_deref().unwrap_or(""),
            self.op.tag(),
        ] {
            out.extend_from_slice(&(field.len() as u32).to_le_bytes());
            out.extend_from_slice(field.as_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Cursor { bytes, pos: 0 };
        let mut fields = Vec::with_capacity(4);
        for _ in 0..4 {
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            fields.push(String::from_utf8(raw.to_vec()).map_err(|_| "payload field is not UTF-8".to_string())?);
        }
        if r.remaining() != 0 {
            return Err("trailing payload bytes".into());
        }
        let op = match fields[3].as_str() {
            "log_data" => TxOp::LogData,
            "log_result" => TxOp::LogResult,
            other => return Err(format!("unknown op {other:?}")),
        };
        let result_hash = (!fields[2].is_empty()).then(|| fields[2].clone());
        if (op == TxOp::LogResult) != result_hash.is_some() {
            return Err("result hash presence does not match op".into());
        }
        Ok(Self {
            claim_id: fields[0].clone(),
            data_hash: fields[1].clone(),
            result_hash,
            op,
        })
    }

    /// `0x` followed by the SHA-256 of the canonical payload.
    pub fn tx_hash(&self) -> String {
        tx_hash_of(&self.encode())
    }
}

pub fn tx_hash_of(payload: &[u8]) -> String {
    format!("0x{}", hex::encode(Sha256::digest(payload)))
}
