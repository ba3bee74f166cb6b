use rand::{Rng, RngCore};

use crate::arith::Modulus;
use crate::poly::RnsPoly;

/// Centered binomial parameter; variance `ETA / 2` gives sigma ≈ 3.24.
pub const CBD_ETA: u32 = 21;

pub fn ternary<R: RngCore>(rng: &mut R, n: usize) -> Vec<i64> {
    (0..n).map(|_| rng.gen_range(-1i64..=1)).collect()
}

pub fn centered_binomial<R: RngCore>(rng: &mut R, n: usize) -> Vec<i64> {
    let mask = (1u64 << CBD_ETA) - 1;
    (0..n)
        .map(|_| {
            let x = rng.next_u64();
            (x & mask).count_ones() as i64 - ((x >> 32) & mask).count_ones() as i64
        })
        .collect()
}

/// Uniform residues per limb; uniform in every limb is uniform mod the
/// product, and uniform in coefficient order is uniform in NTT order.
pub fn uniform<R: RngCore>(rng: &mut R, n: usize, moduli: &[Modulus]) -> RnsPoly {
    RnsPoly {
        limbs: moduli
            .iter()
            .map(|m| (0..n).map(|_| rng.gen_range(0..m.value())).collect())
            .collect(),
    }
}
