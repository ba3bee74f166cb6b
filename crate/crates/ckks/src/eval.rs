//! Encoding, encryption and homomorphic evaluation.
//!
//! Every multiplication is followed immediately by a rescale, so a product
//! always lands one level below its operands. Additions require identical
//! level and scale; `align` is the explicit way to bring a ciphertext onto
//! another's level and scale.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::ciphertext::{Ciphertext, Plaintext};
use crate::error::{HeError, Result};
use crate::keys::{EvalKeys, KeySwitchKey, PublicKey, SecretKey};
use crate::par;
use crate::params::{CkksContext, ParamsId};
use crate::poly::RnsPoly;
use crate::sampling;

/// `c0 + c1*z + c3*z^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddCubic {
    pub c0: f64,
    pub c1: f64,
    pub c3: f64,
}

impl OddCubic {
    pub fn eval(&self, z: f64) -> f64 {
        self.c0 + self.c1 * z + self.c3 * z * z * z
    }
}

/// Largest magnitude a rounded constant may take before reduction.
const MAX_CONSTANT: f64 = (1u64 << 62) as f64;

impl CkksContext {
    fn check_id(&self, id: ParamsId) -> Result<()> {
        if id != self.id() {
            return Err(HeError::KeyParamsMismatch);
        }
        Ok(())
    }

    /// Encodes real values into the first `values.len()` slots (the rest are
    /// zero) at the given level and scale.
    pub fn encode(&self, values: &[f64], level: usize, scale: f64) -> Result<Plaintext> {
        let slots = self.slot_count();
        if values.len() > slots {
            return Err(HeError::SlotOverflow {
                len: values.len(),
                slots,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(HeError::NonFiniteInput { index });
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(HeError::InvalidScale(scale));
        }
        self.check_level(level)?;
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coeffs = self.encoder().slots_to_coeffs(&complex);
        let moduli = self.level_moduli(level);
        let scaled: Vec<f64> = coeffs.iter().map(|c| (c * scale).round()).collect();
        let limbs = par::map_indices(level + 1, |i| {
            let m = &moduli[i];
            scaled
                .iter()
                .map(|&x| {
                    if x.abs() < MAX_CONSTANT {
                        m.reduce_i64(x as i64)
                    } else {
                        m.reduce_i128(x as i128)
                    }
                })
                .collect()
        });
        Ok(Plaintext {
            params_id: self.id(),
            poly: RnsPoly { limbs },
            level,
            scale,
        })
    }

    /// Encodes at the top level with the default scale.
    pub fn encode_default(&self, values: &[f64]) -> Result<Plaintext> {
        self.encode(values, self.max_level(), self.default_scale())
    }

    /// Decodes all `slot_count` real slot values. The message is read from the
    /// base prime alone, which holds it exactly while `|m| < q_0 / 2`.
    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        let m = self.modulus(0);
        let coeffs: Vec<f64> = pt.poly.limbs[0]
            .iter()
            .map(|&c| m.center(c) as f64 / pt.scale)
            .collect();
        self.encoder()
            .coeffs_to_slots(&coeffs)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    pub fn encrypt<R: RngCore>(
        &self,
        pt: &Plaintext,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        self.check_id(pk.params_id)?;
        self.check_id(pt.params_id)?;
        let level = pt.level;
        let n = self.ring_dimension();
        let moduli = self.level_moduli(level);
        let basis = self.level_basis(level);

        let mut v = RnsPoly::from_signed(&sampling::ternary(rng, n), moduli);
        let e0 = RnsPoly::from_signed(&sampling::centered_binomial(rng, n), moduli);
        let e1 = RnsPoly::from_signed(&sampling::centered_binomial(rng, n), moduli);
        self.to_ntt(&mut v, &basis);
        let mut c0 = v.mul_pointwise(&pk.b.truncated(level + 1), moduli);
        let mut c1 = v.mul_pointwise(&pk.a.truncated(level + 1), moduli);
        self.from_ntt(&mut c0, &basis);
        self.from_ntt(&mut c1, &basis);
        c0.add_assign(&e0, moduli);
        c0.add_assign(&pt.poly, moduli);
        c1.add_assign(&e1, moduli);
        Ok(Ciphertext {
            params_id: self.id(),
            c0,
            c1,
            level,
            scale: pt.scale,
        })
    }

    /// Encrypts with a generator seeded from the OS.
    pub fn encrypt_fresh(&self, pt: &Plaintext, pk: &PublicKey) -> Result<Ciphertext> {
        self.encrypt(pt, pk, &mut ChaCha20Rng::from_entropy())
    }

    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
        self.check_id(sk.params_id)?;
        self.check_id(ct.params_id)?;
        let level = ct.level;
        let s = sk.poly.truncated(level + 1);
        let mut m = self.poly_mul(&ct.c1, &s, level);
        m.add_assign(&ct.c0, self.level_moduli(level));
        Ok(Plaintext {
            params_id: self.id(),
            poly: m,
            level,
            scale: ct.scale,
        })
    }

    fn check_same_level(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        self.check_id(a.params_id)?;
        self.check_id(b.params_id)?;
        if a.level != b.level {
            return Err(HeError::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_same_level(a, b)?;
        if a.scale != b.scale {
            return Err(HeError::ScaleMismatch {
                left: a.scale,
                right: b.scale,
            });
        }
        let moduli = self.level_moduli(a.level);
        let mut out = a.clone();
        out.c0.add_assign(&b.c0, moduli);
        out.c1.add_assign(&b.c1, moduli);
        Ok(out)
    }

    pub fn add_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.check_id(ct.params_id)?;
        self.check_id(pt.params_id)?;
        if pt.level < ct.level {
            return Err(HeError::LevelMismatch {
                left: ct.level,
                right: pt.level,
            });
        }
        if ct.scale != pt.scale {
            return Err(HeError::ScaleMismatch {
                left: ct.scale,
                right: pt.scale,
            });
        }
        let mut out = ct.clone();
        out.c0
            .add_assign(&pt.poly.truncated(ct.level + 1), self.level_moduli(ct.level));
        Ok(out)
    }

    /// Adds the constant `c` to every slot at the ciphertext's own scale.
    pub fn add_const(&self, ct: &Ciphertext, c: f64) -> Result<Ciphertext> {
        self.check_id(ct.params_id)?;
        let k = round_constant(c * ct.scale)?;
        let mut out = ct.clone();
        for (limb, m) in out.c0.limbs.iter_mut().zip(self.level_moduli(ct.level)) {
            limb[0] = m.add(limb[0], m.reduce_i64(k));
        }
        Ok(out)
    }

    /// Ciphertext product, relinearized and rescaled.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, keys: &EvalKeys) -> Result<Ciphertext> {
        self.check_same_level(a, b)?;
        self.check_id(keys.params_id)?;
        let level = a.level;
        require_levels(level, 1)?;
        let basis = self.level_basis(level);
        let moduli = self.level_moduli(level);

        let mut polys = [a.c0.clone(), a.c1.clone(), b.c0.clone(), b.c1.clone()];
        for p in polys.iter_mut() {
            self.to_ntt(p, &basis);
        }
        let [a0, a1, b0, b1] = polys;
        let mut d0 = a0.mul_pointwise(&b0, moduli);
        let mut d1 = a0.mul_pointwise(&b1, moduli);
        d1.fma_pointwise(&a1, &b0, moduli);
        let mut d2 = a1.mul_pointwise(&b1, moduli);
        self.from_ntt(&mut d0, &basis);
        self.from_ntt(&mut d1, &basis);
        self.from_ntt(&mut d2, &basis);

        let (k0, k1) = self.key_switch(&d2, level, &keys.relin);
        d0.add_assign(&k0, moduli);
        d1.add_assign(&k1, moduli);
        let product = Ciphertext {
            params_id: self.id(),
            c0: d0,
            c1: d1,
            level,
            scale: a.scale * b.scale,
        };
        Ok(self.rescale(&product))
    }

    /// Ciphertext-plaintext product, rescaled.
    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.check_id(ct.params_id)?;
        self.check_id(pt.params_id)?;
        if pt.level < ct.level {
            return Err(HeError::LevelMismatch {
                left: ct.level,
                right: pt.level,
            });
        }
        let level = ct.level;
        require_levels(level, 1)?;
        let basis = self.level_basis(level);
        let moduli = self.level_moduli(level);
        let mut p = pt.poly.truncated(level + 1);
        self.to_ntt(&mut p, &basis);
        let mut c0 = ct.c0.clone();
        let mut c1 = ct.c1.clone();
        self.to_ntt(&mut c0, &basis);
        self.to_ntt(&mut c1, &basis);
        let mut c0 = c0.mul_pointwise(&p, moduli);
        let mut c1 = c1.mul_pointwise(&p, moduli);
        self.from_ntt(&mut c0, &basis);
        self.from_ntt(&mut c1, &basis);
        let product = Ciphertext {
            params_id: self.id(),
            c0,
            c1,
            level,
            scale: ct.scale * pt.scale,
        };
        Ok(self.rescale(&product))
    }

    /// Multiplies every slot by `c` and rescales, choosing the constant's
    /// encoding scale so that the result carries exactly `target_scale`.
    pub fn mul_const(&self, ct: &Ciphertext, c: f64, target_scale: f64) -> Result<Ciphertext> {
        self.check_id(ct.params_id)?;
        require_levels(ct.level, 1)?;
        if !(target_scale.is_finite() && target_scale > 0.0) {
            return Err(HeError::InvalidScale(target_scale));
        }
        let q_last = self.modulus(ct.level).value() as f64;
        let pt_scale = target_scale * q_last / ct.scale;
        let k = round_constant(c * pt_scale)?;
        let moduli = self.level_moduli(ct.level);
        let scalars: Vec<u64> = moduli.iter().map(|m| m.reduce_i64(k)).collect();
        let mut out = ct.clone();
        out.c0.scalar_mul_assign(&scalars, moduli);
        out.c1.scalar_mul_assign(&scalars, moduli);
        let mut out = self.rescale(&out);
        out.scale = target_scale;
        Ok(out)
    }

    /// Brings `ct` to `target_level` with exactly `target_scale` by a
    /// multiplication with an encoded 1.0, dropping surplus primes first.
    pub fn align(&self, ct: &Ciphertext, target_level: usize, target_scale: f64) -> Result<Ciphertext> {
        if ct.level <= target_level {
            return Err(HeError::NoLevelsRemaining {
                needed: target_level + 1,
                available: ct.level,
            });
        }
        let dropped = self.mod_drop(ct, target_level + 1)?;
        self.mul_const(&dropped, 1.0, target_scale)
    }

    /// Discards chain primes above `level` without changing the scale.
    pub fn mod_drop(&self, ct: &Ciphertext, level: usize) -> Result<Ciphertext> {
        self.check_id(ct.params_id)?;
        if level > ct.level {
            return Err(HeError::LevelMismatch {
                left: ct.level,
                right: level,
            });
        }
        Ok(Ciphertext {
            params_id: ct.params_id,
            c0: ct.c0.truncated(level + 1),
            c1: ct.c1.truncated(level + 1),
            level,
            scale: ct.scale,
        })
    }

    /// Divides by the top prime of the ciphertext's level, rounding.
    fn rescale(&self, ct: &Ciphertext) -> Ciphertext {
        let level = ct.level;
        debug_assert!(level > 0);
        let q_last = self.modulus(level);
        let rescale_poly = |p: &RnsPoly| -> RnsPoly {
            let last: Vec<i64> = p.limbs[level].iter().map(|&x| q_last.center(x)).collect();
            let limbs = par::map_indices(level, |i| {
                let m = self.modulus(i);
                let inv = self.rescale_inv(level, i);
                let inv_s = m.shoup(inv);
                p.limbs[i]
                    .iter()
                    .zip(&last)
                    .map(|(&x, &r)| m.mul_shoup(m.sub(x, m.reduce_i64(r)), inv, inv_s))
                    .collect()
            });
            RnsPoly { limbs }
        };
        Ciphertext {
            params_id: ct.params_id,
            c0: rescale_poly(&ct.c0),
            c1: rescale_poly(&ct.c1),
            level: level - 1,
            scale: ct.scale / q_last.value() as f64,
        }
    }

    /// Switches `d` (coefficient form at `level`, decryptable under some `s'`)
    /// to a pair decryptable under `s`, using one digit per chain prime and
    /// dividing out the special prime at the end.
    fn key_switch(&self, d: &RnsPoly, level: usize, key: &KeySwitchKey) -> (RnsPoly, RnsPoly) {
        let n = self.ring_dimension();
        let ext = self.extended_basis(level);
        let centered: Vec<Vec<i64>> = (0..=level)
            .map(|j| {
                let m = self.modulus(j);
                d.limbs[j].iter().map(|&c| m.center(c)).collect()
            })
            .collect();

        let accs: Vec<(Vec<u64>, Vec<u64>)> = par::map_indices(ext.len(), |k| {
            let t = ext[k];
            let m = self.modulus(t);
            let table = self.ntt(t);
            let mut acc0 = vec![0u128; n];
            let mut acc1 = vec![0u128; n];
            let mut lifted = vec![0u64; n];
            for j in 0..=level {
                if t == j {
                    lifted.copy_from_slice(&d.limbs[j]);
                } else {
                    for (x, &c) in lifted.iter_mut().zip(&centered[j]) {
                        *x = m.reduce_i64(c);
                    }
                }
                table.forward(&mut lifted);
                let kb = &key.b[j].limbs[t];
                let ka = &key.a[j].limbs[t];
                for i in 0..n {
                    acc0[i] += lifted[i] as u128 * kb[i] as u128;
                    acc1[i] += lifted[i] as u128 * ka[i] as u128;
                }
                // at most 8 products of two sub-2^62 residues fit in a u128
                if (j + 1) % 8 == 0 || j == level {
                    for i in 0..n {
                        acc0[i] = m.reduce_wide(acc0[i]) as u128;
                        acc1[i] = m.reduce_wide(acc1[i]) as u128;
                    }
                }
            }
            let mut r0: Vec<u64> = acc0.iter().map(|&x| x as u64).collect();
            let mut r1: Vec<u64> = acc1.iter().map(|&x| x as u64).collect();
            table.inverse(&mut r0);
            table.inverse(&mut r1);
            (r0, r1)
        });

        let special = self.modulus(self.special_index());
        let (sp0, sp1) = &accs[level + 1];
        let mod_down = |which: usize, sp: &Vec<u64>| -> RnsPoly {
            let sp_centered: Vec<i64> = sp.iter().map(|&x| special.center(x)).collect();
            let limbs = par::map_indices(level + 1, |i| {
                let m = self.modulus(i);
                let inv = self.special_inv(i);
                let inv_s = m.shoup(inv);
                let src = if which == 0 { &accs[i].0 } else { &accs[i].1 };
                src.iter()
                    .zip(&sp_centered)
                    .map(|(&x, &r)| m.mul_shoup(m.sub(x, m.reduce_i64(r)), inv, inv_s))
                    .collect()
            });
            RnsPoly { limbs }
        };
        (mod_down(0, sp0), mod_down(1, sp1))
    }

    fn rotate_by_key(&self, ct: &Ciphertext, step: usize, key: &KeySwitchKey) -> Ciphertext {
        let g = self.galois_element(step);
        let moduli = self.level_moduli(ct.level);
        let mut c0 = ct.c0.automorphism(g, moduli);
        let c1 = ct.c1.automorphism(g, moduli);
        let (k0, k1) = self.key_switch(&c1, ct.level, key);
        c0.add_assign(&k0, moduli);
        Ciphertext {
            params_id: ct.params_id,
            c0,
            c1: k1,
            level: ct.level,
            scale: ct.scale,
        }
    }

    /// Cyclic left rotation of the slots by `steps` (negative rotates right).
    /// Steps without a dedicated key are decomposed into power-of-two keys.
    pub fn rotate(&self, ct: &Ciphertext, steps: i64, keys: &EvalKeys) -> Result<Ciphertext> {
        self.check_id(ct.params_id)?;
        self.check_id(keys.params_id)?;
        let slots = self.slot_count() as i64;
        let k = steps.rem_euclid(slots) as usize;
        if k == 0 {
            return Ok(ct.clone());
        }
        if let Some(key) = keys.rotations.get(&k) {
            return Ok(self.rotate_by_key(ct, k, key));
        }
        let mut out = ct.clone();
        let mut remaining = k;
        while remaining != 0 {
            let bit = 1usize << remaining.trailing_zeros();
            let key = keys
                .rotations
                .get(&bit)
                .ok_or(HeError::MissingRotationKey(bit))?;
            out = self.rotate_by_key(&out, bit, key);
            remaining &= !bit;
        }
        Ok(out)
    }

    /// Sums slots `0..span` into slot 0 (`span` a power of two) with
    /// `log2(span)` rotations.
    pub fn rotate_sum(&self, ct: &Ciphertext, span: usize, keys: &EvalKeys) -> Result<Ciphertext> {
        debug_assert!(span.is_power_of_two());
        let mut acc = ct.clone();
        let mut step = 1;
        while step < span {
            let rotated = self.rotate(&acc, step as i64, keys)?;
            acc = self.add(&acc, &rotated)?;
            step <<= 1;
        }
        Ok(acc)
    }

    /// `<x, w>` over the first `n_features` slots, returned in slot 0.
    /// Consumes one level.
    pub fn inner_product(
        &self,
        x: &Ciphertext,
        w: &Ciphertext,
        n_features: usize,
        keys: &EvalKeys,
    ) -> Result<Ciphertext> {
        check_feature_count(n_features, self.slot_count())?;
        let prod = self.mul(x, w, keys)?;
        self.rotate_sum(&prod, n_features.next_power_of_two(), keys)
    }

    /// As `inner_product` with plaintext weights.
    pub fn inner_product_plain(
        &self,
        x: &Ciphertext,
        w: &Plaintext,
        n_features: usize,
        keys: &EvalKeys,
    ) -> Result<Ciphertext> {
        check_feature_count(n_features, self.slot_count())?;
        let prod = self.mul_plain(x, w)?;
        self.rotate_sum(&prod, n_features.next_power_of_two(), keys)
    }

    /// Slotwise `c0 + c1*z + c3*z^3`; consumes two levels.
    pub fn eval_poly_odd(&self, z: &Ciphertext, poly: &OddCubic, keys: &EvalKeys) -> Result<Ciphertext> {
        self.check_id(z.params_id)?;
        require_levels(z.level, 2)?;
        let z_sq = self.mul(z, z, keys)?;
        let c3_z = self.mul_const(z, poly.c3, z_sq.scale)?;
        let cubic = self.mul(&z_sq, &c3_z, keys)?;
        let z_dropped = self.mod_drop(z, z.level - 1)?;
        let linear = self.mul_const(&z_dropped, poly.c1, cubic.scale)?;
        let sum = self.add(&cubic, &linear)?;
        self.add_const(&sum, poly.c0)
    }
}

fn require_levels(available: usize, needed: usize) -> Result<()> {
    if available < needed {
        return Err(HeError::NoLevelsRemaining { needed, available });
    }
    Ok(())
}

fn check_feature_count(n: usize, slots: usize) -> Result<()> {
    if n == 0 || n > slots {
        return Err(HeError::SlotOverflow { len: n, slots });
    }
    Ok(())
}

fn round_constant(x: f64) -> Result<i64> {
    if !x.is_finite() || x.abs() >= MAX_CONSTANT {
        return Err(HeError::NonFiniteInput { index: 0 });
    }
    Ok(x.round() as i64)
}
