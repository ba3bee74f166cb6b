//! Little-endian binary container.
//!
//! Every top-level object starts with the magic `HEC1`, a `u16` version and a
//! one-byte kind tag. Polynomials are written as a `u32` limb count followed
//! by, per limb, a `u32` length and that many `u64` residues.

use crate::error::{HeError, Result};
use crate::poly::RnsPoly;

pub const MAGIC: &[u8; 4] = b"HEC1";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Params = 1,
    Plaintext = 2,
    Ciphertext = 3,
    SecretKey = 4,
    PublicKey = 5,
    EvalKeys = 6,
    PrivateContext = 7,
    PublicContext = 8,
}

impl Kind {
    fn from_u8(b: u8) -> Result<Self> {
        Ok(match b {
            1 => Kind::Params,
            2 => Kind::Plaintext,
            3 => Kind::Ciphertext,
            4 => Kind::SecretKey,
            5 => Kind::PublicKey,
            6 => Kind::EvalKeys,
            7 => Kind::PrivateContext,
            8 => Kind::PublicContext,
            other => return Err(HeError::Format(format!("unknown kind tag {other}"))),
        })
    }
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn with_header(kind: Kind) -> Self {
        let mut w = Writer::default();
        w.buf.extend_from_slice(MAGIC);
        w.put_u16(VERSION);
        w.put_u8(kind as u8);
        w
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.put_u64(v.to_bits());
    }

    pub fn put_bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn put_poly(&mut self, p: &RnsPoly) {
        self.put_u32(p.limbs.len() as u32);
        for limb in &p.limbs {
            self.put_u32(limb.len() as u32);
            self.buf.reserve(limb.len() * 8);
            for &x in limb {
                self.buf.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    /// Consumes and checks the header, returning a reader over the body.
    pub fn with_header(data: &'a [u8], expected: Kind) -> Result<Self> {
        let mut r = Self::new(data);
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(HeError::Format("bad magic".into()));
        }
        let version = r.get_u16()?;
        if version != VERSION {
            return Err(HeError::Format(format!("unsupported version {version}")));
        }
        let kind = Kind::from_u8(r.get_u8()?)?;
        if kind != expected {
            return Err(HeError::Format(format!(
                "expected {expected:?}, found {kind:?}"
            )));
        }
        Ok(r)
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| HeError::Format("unexpected end of input".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn get_u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.get_u64()?))
    }

    pub fn get_bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        self.take(len)
    }

    pub fn get_poly(&mut self) -> Result<RnsPoly> {
        let count = self.get_u32()? as usize;
        if count > 64 {
            return Err(HeError::Format(format!("limb count {count} implausible")));
        }
        let mut limbs = Vec::with_capacity(count);
        for _ in 0..count {
            let len = self.get_u32()? as usize;
            let raw = self.take(len.checked_mul(8).ok_or_else(|| {
                HeError::Format("limb length overflow".into())
            })?)?;
            limbs.push(
                raw.chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        Ok(RnsPoly { limbs })
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(HeError::Format(format!(
                "{} trailing bytes",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}
