//! Parameter sets and the precomputed evaluation context.

use sha2::{Digest, Sha256};

use crate::arith::{is_prime, ntt_primes, Modulus, MAX_MODULUS_BITS};
use crate::encoding::Encoder;
use crate::error::{HeError, Result};
use crate::ntt::NttTable;
use crate::serial::{Reader, Writer};

/// Smallest supported ring dimension.
pub const MIN_RING_DIMENSION: usize = 2048;

/// Ring dimension, modulus chain and encoding scale.
///
/// `modulus_chain[0]` is the base prime that holds the final decrypted message;
/// every further prime is one rescaling level. `special_prime` is used only
/// inside key switching and never appears in a ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeParams {
    pub ring_dimension: usize,
    pub modulus_chain: Vec<u64>,
    pub special_prime: u64,
    /// `log2` of the default scale Δ.
    pub scale_bits: u32,
}

impl Default for HeParams {
    /// N = 8192, one 60-bit base prime, four 40-bit level primes, Δ = 2^40.
    fn default() -> Self {
        Self::generate(8192, 60, &[40, 40, 40, 40], 61, 40)
    }
}

impl HeParams {
    /// Builds a parameter set by searching for NTT-friendly primes of the
    /// requested sizes. Panics only if the search space is exhausted.
    pub fn generate(
        ring_dimension: usize,
        base_bits: u32,
        level_bits: &[u32],
        special_bits: u32,
        scale_bits: u32,
    ) -> Self {
        let mut used: Vec<u64> = Vec::new();
        let mut take = |bits: u32| {
            let p = ntt_primes(bits, 1, ring_dimension, &used)[0];
            used.push(p);
            p
        };
        let mut chain = vec![take(base_bits)];
        for &b in level_bits {
            chain.push(take(b));
        }
        let special_prime = take(special_bits);
        Self {
            ring_dimension,
            modulus_chain: chain,
            special_prime,
            scale_bits,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.ring_dimension / 2
    }

    pub fn scale(&self) -> f64 {
        2f64.powi(self.scale_bits as i32)
    }

    /// Index of the top level (number of rescales available).
    pub fn max_level(&self) -> usize {
        self.modulus_chain.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ring_dimension;
        let bad = |m: String| Err(HeError::InvalidParams(m));
        if !n.is_power_of_two() {
            return bad(format!("ring dimension {n} is not a power of two"));
        }
        if n < MIN_RING_DIMENSION {
            return bad(format!("ring dimension {n} below {MIN_RING_DIMENSION}"));
        }
        if self.modulus_chain.len() < 2 {
            return bad("modulus chain needs a base prime and at least one level".into());
        }
        let two_n = 2 * n as u64;
        let mut all: Vec<u64> = self.modulus_chain.clone();
        all.push(self.special_prime);
        for &p in &all {
            let bits = 64 - p.leading_zeros();
            if bits > MAX_MODULUS_BITS || p < 3 {
                return bad(format!("modulus {p} outside supported range"));
            }
            if !is_prime(p) {
                return bad(format!("modulus {p} is not prime"));
            }
            if p % two_n != 1 {
                return bad(format!("modulus {p} is not 1 mod {two_n}"));
            }
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return bad("moduli must be distinct".into());
        }
        if self.scale_bits == 0 {
            return bad("scale must exceed 1".into());
        }
        for &p in &self.modulus_chain[1..] {
            if self.scale_bits > 64 - p.leading_zeros() {
                return bad(format!(
                    "log2(scale) = {} exceeds the {}-bit level prime {p}",
                    self.scale_bits,
                    64 - p.leading_zeros()
                ));
            }
        }
        let max_chain = self.modulus_chain.iter().copied().max().unwrap_or(0);
        if self.special_prime < max_chain {
            return bad("special prime must be at least as large as every chain prime".into());
        }
        Ok(())
    }

    /// Checks that a circuit of multiplicative `depth` fits the chain.
    pub fn require_depth(&self, depth: usize) -> Result<()> {
        if self.max_level() < depth {
            return Err(HeError::InvalidParams(format!(
                "chain supports depth {} but the circuit needs {depth}",
                self.max_level()
            )));
        }
        Ok(())
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.put_u32(self.ring_dimension as u32);
        w.put_u32(self.modulus_chain.len() as u32);
        for &p in &self.modulus_chain {
            w.put_u64(p);
        }
        w.put_u64(self.special_prime);
        w.put_u32(self.scale_bits);
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let ring_dimension = r.get_u32()? as usize;
        let len = r.get_u32()? as usize;
        if len > 64 {
            return Err(HeError::Format(format!("chain length {len} implausible")));
        }
        let modulus_chain = (0..len).map(|_| r.get_u64()).collect::<Result<Vec<_>>>()?;
        let special_prime = r.get_u64()?;
        let scale_bits = r.get_u32()?;
        Ok(Self {
            ring_dimension,
            modulus_chain,
            special_prime,
            scale_bits,
        })
    }

    /// Short fingerprint binding keys and ciphertexts to this parameter set.
    pub fn id(&self) -> ParamsId {
        let mut w = Writer::default();
        self.write(&mut w);
        let digest = Sha256::digest(w.as_bytes());
        let mut id = [0u8; 8];
        id.copy_from_slice(&digest[..8]);
        ParamsId(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamsId(pub [u8; 8]);

/// Validated parameters plus every table the evaluator needs.
///
/// Moduli are indexed so that `0..=max_level` are the chain primes and
/// `special_index()` is the key-switching prime.
#[derive(Debug, Clone)]
pub struct CkksContext {
    params: HeParams,
    id: ParamsId,
    moduli: Vec<Modulus>,
    ntt: Vec<NttTable>,
    encoder: Encoder,
    /// `rescale_inv[l][i] = q_l^{-1} mod q_i` for `i < l`.
    rescale_inv: Vec<Vec<u64>>,
    /// `P^{-1} mod q_i`.
    special_inv: Vec<u64>,
    /// `P mod q_i`.
    special_mod: Vec<u64>,
}

impl CkksContext {
    pub fn new(params: HeParams) -> Result<Self> {
        params.validate()?;
        let n = params.ring_dimension;
        let mut primes = params.modulus_chain.clone();
        primes.push(params.special_prime);
        let moduli: Vec<Modulus> = primes.iter().map(|&p| Modulus::new(p)).collect();
        let ntt = moduli.iter().map(|&m| NttTable::new(m, n)).collect();
        let chain = params.modulus_chain.len();
        let rescale_inv = (0..chain)
            .map(|l| {
                (0..l)
                    .map(|i| moduli[i].inv(primes[l]).unwrap())
                    .collect()
            })
            .collect();
        let special_inv = (0..chain)
            .map(|i| moduli[i].inv(params.special_prime).unwrap())
            .collect();
        let special_mod = (0..chain)
            .map(|i| moduli[i].reduce(params.special_prime))
            .collect();
        Ok(Self {
            id: params.id(),
            encoder: Encoder::new(n),
            params,
            moduli,
            ntt,
            rescale_inv,
            special_inv,
            special_mod,
        })
    }

    pub fn params(&self) -> &HeParams {
        &self.params
    }

    pub fn id(&self) -> ParamsId {
        self.id
    }

    pub fn ring_dimension(&self) -> usize {
        self.params.ring_dimension
    }

    pub fn slot_count(&self) -> usize {
        self.params.slot_count()
    }

    pub fn max_level(&self) -> usize {
        self.params.max_level()
    }

    pub fn default_scale(&self) -> f64 {
        self.params.scale()
    }

    pub(crate) fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub(crate) fn modulus(&self, i: usize) -> &Modulus {
        &self.moduli[i]
    }

    pub(crate) fn ntt(&self, i: usize) -> &NttTable {
        &self.ntt[i]
    }

    pub(crate) fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub(crate) fn special_index(&self) -> usize {
        self.params.modulus_chain.len()
    }

    pub(crate) fn rescale_inv(&self, level: usize, i: usize) -> u64 {
        self.rescale_inv[level][i]
    }

    pub(crate) fn special_inv(&self, i: usize) -> u64 {
        self.special_inv[i]
    }

    pub(crate) fn special_mod(&self, i: usize) -> u64 {
        self.special_mod[i]
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        if level > self.max_level() {
            return Err(HeError::InvalidLevel {
                level,
                max: self.max_level(),
            });
        }
        Ok(())
    }

    /// Galois element `5^steps mod 2N`; rotates slots left by `steps`.
    pub fn galois_element(&self, steps: usize) -> usize {
        let m = 2 * self.ring_dimension();
        let mut g = 1usize;
        for _ in 0..(steps % self.slot_count()) {
            g = g * 5 % m;
        }
        g
    }
}
