//! Ring elements in residue-number-system form.
//!
//! Limb `i` holds the residues modulo the `i`-th modulus of whichever basis the
//! caller uses (a chain prefix, optionally followed by the special prime).
//! Whether the limbs are in coefficient or NTT order is tracked by the owner.

use crate::arith::Modulus;
use crate::error::{HeError, Result};
use crate::par;
use crate::params::CkksContext;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPoly {
    pub limbs: Vec<Vec<u64>>,
}

impl RnsPoly {
    pub fn limb_count(&self) -> usize {
        self.limbs.len()
    }

    pub fn degree(&self) -> usize {
        self.limbs.first().map_or(0, Vec::len)
    }

    /// Builds a polynomial from signed coefficients over the given moduli.
    pub fn from_signed(coeffs: &[i64], moduli: &[Modulus]) -> Self {
        Self {
            limbs: moduli
                .iter()
                .map(|m| coeffs.iter().map(|&c| m.reduce_i64(c)).collect())
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &RnsPoly, moduli: &[Modulus]) {
        par::for_each_mut(&mut self.limbs, |i, limb| {
            let m = &moduli[i];
            for (a, &b) in limb.iter_mut().zip(&other.limbs[i]) {
                *a = m.add(*a, b);
            }
        });
    }

    pub fn sub_assign(&mut self, other: &RnsPoly, moduli: &[Modulus]) {
        par::for_each_mut(&mut self.limbs, |i, limb| {
            let m = &moduli[i];
            for (a, &b) in limb.iter_mut().zip(&other.limbs[i]) {
                *a = m.sub(*a, b);
            }
        });
    }

    /// Pointwise product; both operands must be in NTT order.
    pub fn mul_pointwise(&self, other: &RnsPoly, moduli: &[Modulus]) -> RnsPoly {
        let limbs = par::map_indices(self.limbs.len(), |i| {
            let m = &moduli[i];
            self.limbs[i]
                .iter()
                .zip(&other.limbs[i])
                .map(|(&a, &b)| m.mul(a, b))
                .collect()
        });
        RnsPoly { limbs }
    }

    /// `self += a * b` pointwise (NTT order).
    pub fn fma_pointwise(&mut self, a: &RnsPoly, b: &RnsPoly, moduli: &[Modulus]) {
        par::for_each_mut(&mut self.limbs, |i, limb| {
            let m = &moduli[i];
            for ((acc, &x), &y) in limb.iter_mut().zip(&a.limbs[i]).zip(&b.limbs[i]) {
                *acc = m.add(*acc, m.mul(x, y));
            }
        });
    }

    pub fn scalar_mul_assign(&mut self, scalars: &[u64], moduli: &[Modulus]) {
        par::for_each_mut(&mut self.limbs, |i, limb| {
            let m = &moduli[i];
            let s = scalars[i];
            let ss = m.shoup(s);
            for a in limb.iter_mut() {
                *a = m.mul_shoup(*a, s, ss);
            }
        });
    }

    /// Coefficient-domain automorphism `X -> X^g` for odd `g`.
    pub fn automorphism(&self, g: usize, moduli: &[Modulus]) -> RnsPoly {
        let n = self.degree();
        let two_n = 2 * n;
        let limbs = par::map_indices(self.limbs.len(), |i| {
            let m = &moduli[i];
            let src = &self.limbs[i];
            let mut out = vec![0u64; n];
            let mut k = 0usize;
            for &c in src.iter() {
                if k < n {
                    out[k] = c;
                } else {
                    out[k - n] = m.neg(c);
                }
                k += g;
                if k >= two_n {
                    k -= two_n;
                }
            }
            out
        });
        RnsPoly { limbs }
    }

    /// Drops limbs beyond `count`.
    pub fn truncated(&self, count: usize) -> RnsPoly {
        RnsPoly {
            limbs: self.limbs[..count].to_vec(),
        }
    }

    /// Checks shape and residue ranges against the context moduli at `indices`.
    pub(crate) fn check_shape(&self, ctx: &CkksContext, indices: &[usize]) -> Result<()> {
        if self.limbs.len() != indices.len() {
            return Err(HeError::Format(format!(
                "expected {} limbs, found {}",
                indices.len(),
                self.limbs.len()
            )));
        }
        let n = ctx.ring_dimension();
        for (limb, &idx) in self.limbs.iter().zip(indices) {
            if limb.len() != n {
                return Err(HeError::Format(format!("limb length {} != {n}", limb.len())));
            }
            let q = ctx.modulus(idx).value();
            if limb.iter().any(|&x| x >= q) {
                return Err(HeError::Format("residue out of range".into()));
            }
        }
        Ok(())
    }
}

impl CkksContext {
    /// Forward NTT of limbs `0..limb_count`, where limb `i` uses modulus
    /// `basis[i]`.
    pub(crate) fn to_ntt(&self, p: &mut RnsPoly, basis: &[usize]) {
        par::for_each_mut(&mut p.limbs, |i, limb| self.ntt(basis[i]).forward(limb));
    }

    pub(crate) fn from_ntt(&self, p: &mut RnsPoly, basis: &[usize]) {
        par::for_each_mut(&mut p.limbs, |i, limb| self.ntt(basis[i]).inverse(limb));
    }

    /// Moduli for the chain prefix `0..=level`.
    pub(crate) fn level_moduli(&self, level: usize) -> &[Modulus] {
        &self.moduli()[..=level]
    }

    pub(crate) fn level_basis(&self, level: usize) -> Vec<usize> {
        (0..=level).collect()
    }

    /// Chain prefix plus the special prime.
    pub(crate) fn extended_basis(&self, level: usize) -> Vec<usize> {
        let mut b: Vec<usize> = (0..=level).collect();
        b.push(self.special_index());
        b
    }

    /// Negacyclic product of two coefficient-form polynomials at `level`.
    pub(crate) fn poly_mul(&self, a: &RnsPoly, b: &RnsPoly, level: usize) -> RnsPoly {
        let basis = self.level_basis(level);
        let (mut fa, mut fb) = (a.truncated(level + 1), b.truncated(level + 1));
        self.to_ntt(&mut fa, &basis);
        self.to_ntt(&mut fb, &basis);
        let mut prod = fa.mul_pointwise(&fb, self.level_moduli(level));
        self.from_ntt(&mut prod, &basis);
        prod
    }
}
