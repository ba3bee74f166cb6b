//! AES-256-GCM file envelopes and SHA-256 content hashing.
//!
//! Layout: `"ENV1" | version u16 LE | nonce[12] | ciphertext | tag[16]`.
//! The six header bytes and the nonce are bound as associated data, so any
//! modified byte fails authentication.

use std::fs;
use std::path::Path;

use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce, Tag};
use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ENV1";
pub const VERSION: u16 = 1;
pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
const HEADER_LEN: usize = 4 + 2;

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("not an envelope (bad magic)")]
    BadMagic,
    #[error("unsupported envelope version {0}")]
    WrongVersion(u16),
    #[error("envelope failed authentication")]
    AuthFailure,
    #[error("symmetric key must be {KEY_LEN} bytes, got {0}")]
    InvalidKeyLength(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey([u8; KEY_LEN]);

impl std::fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

impl SymmetricKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| EnvelopeError::InvalidKeyLength(bytes.len()))?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    /// Reads a raw 32-byte key file.
    pub fn load(path: &Path) -> Result<Self, EnvelopeError> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), EnvelopeError> {
        fs::write(path, self.0)?;
        Ok(())
    }
}

/// Fresh key material from the OS, or from a seeded generator for tests.
pub fn sym_keygen(seed: Option<u64>) -> SymmetricKey {
    let mut key = [0u8; KEY_LEN];
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s).fill_bytes(&mut key),
        None => OsRng.fill_bytes(&mut key),
    }
    SymmetricKey(key)
}

/// Parsed envelope; `body` is the ciphertext without the tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeFile {
    pub version: u16,
    pub nonce: [u8; NONCE_LEN],
    pub body: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl EnvelopeFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + NONCE_LEN + self.body.len() + TAG_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.body);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Splits raw bytes into fields. Anything too short to hold a nonce and
    /// tag is reported as an authentication failure.
    pub fn parse(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
            return Err(EnvelopeError::BadMagic);
        }
        if bytes.len() < HEADER_LEN + NONCE_LEN + TAG_LEN {
            return Err(EnvelopeError::AuthFailure);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(EnvelopeError::WrongVersion(version));
        }
        let nonce: [u8; NONCE_LEN] = bytes[HEADER_LEN..HEADER_LEN + NONCE_LEN].try_into().unwrap();
        let tag_start = bytes.len() - TAG_LEN;
        Ok(Self {
            version,
            nonce,
            body: bytes[HEADER_LEN + NONCE_LEN..tag_start].to_vec(),
            tag: bytes[tag_start..].try_into().unwrap(),
        })
    }

    fn associated_data(version: u16, nonce: &[u8; NONCE_LEN]) -> [u8; HEADER_LEN + NONCE_LEN] {
        let mut ad = [0u8; HEADER_LEN + NONCE_LEN];
        ad[..4].copy_from_slice(MAGIC);
        ad[4..6].copy_from_slice(&version.to_le_bytes());
        ad[6..].copy_from_slice(nonce);
        ad
    }
}

/// Encrypts `payload` under a fresh random nonce.
pub fn seal(payload: &[u8], key: &SymmetricKey) -> EnvelopeFile {
    let mut nonce = [0u8; NONCE_LEN];
    OsRng.fill_bytes(&mut nonce);
    let cipher = Aes256Gcm::new(key.as_bytes().into());
    let mut body = payload.to_vec();
    let ad = EnvelopeFile::associated_data(VERSION, &nonce);
    let tag = cipher
        .encrypt_in_place_detached(Nonce::from_slice(&nonce), &ad, &mut body)
        .expect("payload within GCM length limit");
    EnvelopeFile {
        version: VERSION,
        nonce,
        body,
        tag: tag.into(),
    }
}

/// Authenticates and decrypts. No plaintext is returned unless the tag
/// verifies over header, nonce and body.
pub fn open(env: &EnvelopeFile, key: &SymmetricKey) -> Result<Vec<u8>, EnvelopeError> {
    if env.version != VERSION {
        return Err(EnvelopeError::WrongVersion(env.version));
    }
    let cipher = Aes256Gcm::new(key.as_bytes().into());
    let mut body = env.body.clone();
    let ad = EnvelopeFile::associated_data(env.version, &env.nonce);
    cipher
        .decrypt_in_place_detached(Nonce::from_slice(&env.nonce), &ad, &mut body, Tag::from_slice(&env.tag))
        .map_err(|_| EnvelopeError::AuthFailure)?;
    Ok(body)
}

pub fn open_bytes(bytes: &[u8], key: &SymmetricKey) -> Result<Vec<u8>, EnvelopeError> {
    open(&EnvelopeFile::parse(bytes)?, key)
}

/// Lowercase hex SHA-256.
pub fn content_hash(payload: &[u8]) -> String {
    hex::encode(Sha256::digest(payload))
}
