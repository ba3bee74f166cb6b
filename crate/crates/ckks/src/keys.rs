//! Key hierarchy: ternary secret, RLWE public key, and key-switching material
//! for relinearization and power-of-two slot rotations.
//!
//! Key switching uses one special prime `P` and one digit per chain prime.
//! The key for `s' -> s` holds, per digit `j`, the pair
//! `(b_j, a_j) = (-a_j*s + e_j + P*[j==i]*s', a_j)` in NTT form over every
//! chain prime and `P`.

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{HeError, Result};
use crate::params::{CkksContext, HeParams, ParamsId};
use crate::poly::RnsPoly;
use crate::sampling;
use crate::serial::{Kind, Reader, Writer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub(crate) params_id: ParamsId,
    /// Coefficient form over the chain primes and the special prime.
    pub(crate) poly: RnsPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub(crate) params_id: ParamsId,
    /// NTT form over the chain.
    pub(crate) b: RnsPoly,
    pub(crate) a: RnsPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySwitchKey {
    pub(crate) b: Vec<RnsPoly>,
    pub(crate) a: Vec<RnsPoly>,
}

/// Everything an evaluator needs: relinearization plus rotation keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalKeys {
    pub(crate) params_id: ParamsId,
    pub(crate) relin: KeySwitchKey,
    /// Keyed by left-rotation step (powers of two up to `slots / 2`).
    pub(crate) rotations: BTreeMap<usize, KeySwitchKey>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyBundle {
    pub params: HeParams,
    pub secret_key: SecretKey,
    pub public_key: PublicKey,
    pub eval_keys: EvalKeys,
}

/// The server-side view: no secret key material.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicContext {
    pub params: HeParams,
    pub public_key: PublicKey,
    pub eval_keys: EvalKeys,
}

impl SecretKey {
    pub fn params_id(&self) -> ParamsId {
        self.params_id
    }

    /// Signed ternary coefficients.
    pub fn ternary_coefficients(&self, ctx: &CkksContext) -> Vec<i64> {
        let m = ctx.modulus(0);
        self.poly.limbs[0].iter().map(|&c| m.center(c)).collect()
    }

    pub(crate) fn ntt_form(&self, ctx: &CkksContext) -> RnsPoly {
        let mut s = self.poly.clone();
        let basis: Vec<usize> = (0..s.limb_count()).collect();
        ctx.to_ntt(&mut s, &basis);
        s
    }
}

impl PublicKey {
    pub fn params_id(&self) -> ParamsId {
        self.params_id
    }
}

impl EvalKeys {
    pub fn params_id(&self) -> ParamsId {
        self.params_id
    }

    pub fn rotation_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.rotations.keys().copied()
    }

    /// Keeps only the rotation keys whose step satisfies `keep`.
    pub fn retain_rotations(&mut self, mut keep: impl FnMut(usize) -> bool) {
        self.rotations.retain(|&step, _| keep(step));
    }
}

impl KeyBundle {
    pub fn public_context(&self) -> PublicContext {
        PublicContext {
            params: self.params.clone(),
            public_key: self.public_key.clone(),
            eval_keys: self.eval_keys.clone(),
        }
    }
}

/// Power-of-two rotation steps `1, 2, 4, ..., slots/2`.
pub fn rotation_steps(slots: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |s| Some(s * 2))
        .take_while(|&s| s <= slots / 2)
        .collect()
}

/// Generates a full key bundle. With a seed the output is byte-identical
/// across runs; without one the generator is seeded from the OS.
pub fn keygen(params: &HeParams, seed: Option<u64>) -> Result<KeyBundle> {
    let ctx = CkksContext::new(params.clone())?;
    let mut rng = match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    };
    keygen_with_rng(&ctx, &mut rng)
}

pub fn keygen_with_rng<R: RngCore>(ctx: &CkksContext, rng: &mut R) -> Result<KeyBundle> {
    let n = ctx.ring_dimension();
    let all_moduli = ctx.moduli();
    let full_basis: Vec<usize> = (0..all_moduli.len()).collect();
    let chain_len = ctx.max_level() + 1;

    let s_coeffs = sampling::ternary(rng, n);
    let secret_key = SecretKey {
        params_id: ctx.id(),
        poly: RnsPoly::from_signed(&s_coeffs, all_moduli),
    };
    let s_ntt = secret_key.ntt_form(ctx);

    // public key over the chain only
    let chain_moduli = &all_moduli[..chain_len];
    let chain_basis: Vec<usize> = (0..chain_len).collect();
    let a = sampling::uniform(rng, n, chain_moduli);
    let mut e = RnsPoly::from_signed(&sampling::centered_binomial(rng, n), chain_moduli);
    ctx.to_ntt(&mut e, &chain_basis);
    let s_chain = s_ntt.truncated(chain_len);
    let mut b = e;
    b.sub_assign(&a.mul_pointwise(&s_chain, chain_moduli), chain_moduli);
    let public_key = PublicKey {
        params_id: ctx.id(),
        b,
        a,
    };

    // relinearization: s^2 -> s
    let s_sq = s_ntt.mul_pointwise(&s_ntt, all_moduli);
    let relin = gen_switch_key(ctx, &s_ntt, &s_sq, rng);

    let mut rotations = BTreeMap::new();
    for step in rotation_steps(ctx.slot_count()) {
        let g = ctx.galois_element(step);
        let mut s_rot = secret_key.poly.automorphism(g, all_moduli);
        ctx.to_ntt(&mut s_rot, &full_basis);
        rotations.insert(step, gen_switch_key(ctx, &s_ntt, &s_rot, rng));
    }

    Ok(KeyBundle {
        params: ctx.params().clone(),
        secret_key,
        public_key,
        eval_keys: EvalKeys {
            params_id: ctx.id(),
            relin,
            rotations,
        },
    })
}

/// Key that switches a ciphertext component decryptable under `from` into
/// one decryptable under `s`. Both inputs are NTT form over every modulus.
fn gen_switch_key<R: RngCore>(
    ctx: &CkksContext,
    s: &RnsPoly,
    from: &RnsPoly,
    rng: &mut R,
) -> KeySwitchKey {
    let n = ctx.ring_dimension();
    let moduli = ctx.moduli();
    let full_basis: Vec<usize> = (0..moduli.len()).collect();
    let digits = ctx.max_level() + 1;
    let mut bs = Vec::with_capacity(digits);
    let mut as_ = Vec::with_capacity(digits);
    for j in 0..digits {
        let a = sampling::uniform(rng, n, moduli);
        let mut e = RnsPoly::from_signed(&sampling::centered_binomial(rng, n), moduli);
        ctx.to_ntt(&mut e, &full_basis);
        let mut b = e;
        b.sub_assign(&a.mul_pointwise(s, moduli), moduli);
        // gadget term P * from, only on limb j
        let m = &moduli[j];
        let p_mod = ctx.special_mod(j);
        for (x, &f) in b.limbs[j].iter_mut().zip(&from.limbs[j]) {
            *x = m.add(*x, m.mul(f, p_mod));
        }
        bs.push(b);
        as_.push(a);
    }
    KeySwitchKey { b: bs, a: as_ }
}

// ---------------------------------------------------------------------------
// serialization

fn check_full_poly(ctx: &CkksContext, p: &RnsPoly) -> Result<()> {
    let basis: Vec<usize> = (0..ctx.moduli().len()).collect();
    p.check_shape(ctx, &basis)
}

fn check_chain_poly(ctx: &CkksContext, p: &RnsPoly) -> Result<()> {
    p.check_shape(ctx, &ctx.level_basis(ctx.max_level()))
}

fn write_switch_key(w: &mut Writer, k: &KeySwitchKey) {
    w.put_u32(k.b.len() as u32);
    for (b, a) in k.b.iter().zip(&k.a) {
        w.put_poly(b);
        w.put_poly(a);
    }
}

fn read_switch_key(r: &mut Reader<'_>, ctx: &CkksContext) -> Result<KeySwitchKey> {
    let digits = r.get_u32()? as usize;
    if digits != ctx.max_level() + 1 {
        return Err(HeError::Format(format!("switch key has {digits} digits")));
    }
    let mut b = Vec::with_capacity(digits);
    let mut a = Vec::with_capacity(digits);
    for _ in 0..digits {
        let pb = r.get_poly()?;
        let pa = r.get_poly()?;
        check_full_poly(ctx, &pb)?;
        check_full_poly(ctx, &pa)?;
        b.push(pb);
        a.push(pa);
    }
    Ok(KeySwitchKey { b, a })
}

fn write_secret(w: &mut Writer, sk: &SecretKey) {
    w.put_bytes(&sk.params_id.0);
    w.put_poly(&sk.poly);
}

fn read_params_id(r: &mut Reader<'_>, ctx: &CkksContext) -> Result<ParamsId> {
    let mut id = [0u8; 8];
    id.copy_from_slice(r.get_bytes(8)?);
    if ParamsId(id) != ctx.id() {
        return Err(HeError::KeyParamsMismatch);
    }
    Ok(ParamsId(id))
}

fn read_secret(r: &mut Reader<'_>, ctx: &CkksContext) -> Result<SecretKey> {
    let params_id = read_params_id(r, ctx)?;
    let poly = r.get_poly()?;
    check_full_poly(ctx, &poly)?;
    Ok(SecretKey { params_id, poly })
}

fn write_public(w: &mut Writer, pk: &PublicKey) {
    w.put_bytes(&pk.params_id.0);
    w.put_poly(&pk.b);
    w.put_poly(&pk.a);
}

fn read_public(r: &mut Reader<'_>, ctx: &CkksContext) -> Result<PublicKey> {
    let params_id = read_params_id(r, ctx)?;
    let b = r.get_poly()?;
    let a = r.get_poly()?;
    check_chain_poly(ctx, &b)?;
    check_chain_poly(ctx, &a)?;
    Ok(PublicKey { params_id, b, a })
}

fn write_eval(w: &mut Writer, ek: &EvalKeys) {
    w.put_bytes(&ek.params_id.0);
    write_switch_key(w, &ek.relin);
    w.put_u32(ek.rotations.len() as u32);
    for (&step, key) in &ek.rotations {
        w.put_u32(step as u32);
        write_switch_key(w, key);
    }
}

fn read_eval(r: &mut Reader<'_>, ctx: &CkksContext) -> Result<EvalKeys> {
    let params_id = read_params_id(r, ctx)?;
    let relin = read_switch_key(r, ctx)?;
    let count = r.get_u32()? as usize;
    let mut rotations = BTreeMap::new();
    for _ in 0..count {
        let step = r.get_u32()? as usize;
        if step == 0 || step >= ctx.slot_count() {
            return Err(HeError::Format(format!("rotation step {step} out of range")));
        }
        rotations.insert(step, read_switch_key(r, ctx)?);
    }
    Ok(EvalKeys {
        params_id,
        relin,
        rotations,
    })
}

fn read_params(r: &mut Reader<'_>) -> Result<(HeParams, CkksContext)> {
    let params = HeParams::read(r)?;
    let ctx = CkksContext::new(params.clone())?;
    Ok((params, ctx))
}

impl HeParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::Params);
        self.write(&mut w);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::Params)?;
        let p = HeParams::read(&mut r)?;
        r.finish()?;
        p.validate()?;
        Ok(p)
    }
}

impl SecretKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::SecretKey);
        write_secret(&mut w, self);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8], ctx: &CkksContext) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::SecretKey)?;
        let sk = read_secret(&mut r, ctx)?;
        r.finish()?;
        Ok(sk)
    }
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::PublicKey);
        write_public(&mut w, self);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8], ctx: &CkksContext) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::PublicKey)?;
        let pk = read_public(&mut r, ctx)?;
        r.finish()?;
        Ok(pk)
    }
}

impl EvalKeys {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::EvalKeys);
        write_eval(&mut w, self);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8], ctx: &CkksContext) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::EvalKeys)?;
        let ek = read_eval(&mut r, ctx)?;
        r.finish()?;
        Ok(ek)
    }
}

impl KeyBundle {
    /// `private_context.bin` layout: parameters followed by every key.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::PrivateContext);
        self.params.write(&mut w);
        write_secret(&mut w, &self.secret_key);
        write_public(&mut w, &self.public_key);
        write_eval(&mut w, &self.eval_keys);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::PrivateContext)?;
        let (params, ctx) = read_params(&mut r)?;
        let secret_key = read_secret(&mut r, &ctx)?;
        let public_key = read_public(&mut r, &ctx)?;
        let eval_keys = read_eval(&mut r, &ctx)?;
        r.finish()?;
        Ok(Self {
            params,
            secret_key,
            public_key,
            eval_keys,
        })
    }
}

impl PublicContext {
    /// `public_context.bin` layout: parameters, public key, evaluation keys.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_header(Kind::PublicContext);
        self.params.write(&mut w);
        write_public(&mut w, &self.public_key);
        write_eval(&mut w, &self.eval_keys);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_header(bytes, Kind::PublicContext)?;
        let (params, ctx) = read_params(&mut r)?;
        let public_key = read_public(&mut r, &ctx)?;
        let eval_keys = read_eval(&mut r, &ctx)?;
        r.finish()?;
        Ok(Self {
            params,
            public_key,
            eval_keys,
        })
    }
}
