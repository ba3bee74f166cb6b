use sha2::{Digest, Sha256};

pub const HASH_LEN: usize = 32;
pub const GENESIS_PREV: [u8; HASH_LEN] = [0; HASH_LEN];

/// One block holding exactly one transaction payload (the genesis block's
/// payload is empty).
///
/// Encoded as `index u64 | prev_hash[32] | payload_len u32 | payload |
/// timestamp u64 | wall_clock_ms u64 | block_hash[32]`, all little-endian;
/// `block_hash` is SHA-256 over everything before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub index: u64,
    pub prev_hash: [u8; HASH_LEN],
    pub payload: Vec<u8>,
    /// Non-decreasing along the chain; used for ordering proofs.
    pub timestamp: u64,
    /// Wall-clock milliseconds at append, for display.
    pub wall_clock_ms: u64,
    pub block_hash: [u8; HASH_LEN],
}

impl Block {
    /// Builds a block and computes its hash.
    pub fn sealed(index: u64, prev_hash: [u8; HASH_LEN], payload: Vec<u8>, timestamp: u64, wall_clock_ms: u64) -> Self {
        let mut b = Self {
            index,
            prev_hash,
            payload,
            timestamp,
            wall_clock_ms,
            block_hash: [0; HASH_LEN],
        };
        b.block_hash = b.compute_hash();
        b
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + HASH_LEN + 4 + self.payload.len() + 16);
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.timestamp.to_le_bytes());
        out.extend_from_slice(&self.wall_clock_ms.to_le_bytes());
        out
    }

    pub fn compute_hash(&self) -> [u8; HASH_LEN] {
        Sha256::digest(self.body_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.block_hash)
    }

    pub fn prev_hash_hex(&self) -> String {
        hex::encode(self.prev_hash)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.body_bytes();
        out.extend_from_slice(&self.block_hash);
        out
    }

    /// Strict decode: the slice must hold exactly one block.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Cursor { bytes, pos: 0 };
        let index = r.u64()?;
        let prev_hash = r.array()?;
        let len = r.u32()? as usize;
        let payload = r.take(len)?.to_vec();
        let timestamp = r.u64()?;
        let wall_clock_ms = r.u64()?;
        let block_hash = r.array()?;
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Self {
            index,
            prev_hash,
            payload,
            timestamp,
            wall_clock_ms,
            block_hash,
        })
    }
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
