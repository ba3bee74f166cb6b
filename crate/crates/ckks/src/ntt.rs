//! Negacyclic number-theoretic transform over `Z_q[X]/(X^N + 1)`.
//!
//! Forward is Cooley-Tukey on powers of a primitive `2N`-th root `psi` stored in
//! bit-reversed order; the output is in bit-reversed evaluation order, which is
//! fine for pointwise products. Inverse is the matching Gentleman-Sande pass.

use crate::arith::{primitive_root_2n, Modulus};

#[derive(Debug, Clone)]
pub struct NttTable {
    modulus: Modulus,
    n: usize,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

fn bit_reverse(mut x: usize, log_n: u32) -> usize {
    let mut r = 0;
    for _ in 0..log_n {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    r
}

impl NttTable {
    pub fn new(modulus: Modulus, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let log_n = n.trailing_zeros();
        let psi = primitive_root_2n(&modulus, n);
        let psi_inv = modulus.inv(psi).expect("root is invertible");

        let mut psi_rev = vec![0u64; n];
        let mut psi_inv_rev = vec![0u64; n];
        let mut pw = 1u64;
        let mut pw_inv = 1u64;
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev[r] = pw;
            psi_inv_rev[r] = pw_inv;
            pw = modulus.mul(pw, psi);
            pw_inv = modulus.mul(pw_inv, psi_inv);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| modulus.shoup(w)).collect();
        let n_inv = modulus.inv(n as u64).expect("n invertible mod prime");
        Self {
            modulus,
            n,
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
            n_inv,
            n_inv_shoup: modulus.shoup(n_inv),
        }
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    /// Forward transform with Harvey's lazy butterflies: intermediate values
    /// stay in `[0, 4q)` and are fully reduced once at the end.
    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let w = self.psi_rev[m + i];
                let ws = self.psi_rev_shoup[m + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = mul_shoup_lazy(*y, w, ws, q);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_q {
                v -= two_q;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let q = self.modulus.value();
        let two_q = 2 * q;
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let w = self.psi_inv_rev[h + i];
                let ws = self.psi_inv_rev_shoup[h + i];
                let j1 = 2 * i * t;
                let (lo, hi) = a[j1..j1 + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let u = *x;
                    let v = *y;
                    let mut s = u + v;
                    if s >= two_q {
                        s -= two_q;
                    }
                    *x = s;
                    *y = mul_shoup_lazy(u + two_q - v, w, ws, q);
                }
            }
            t <<= 1;
            m = h;
        }
        let md = &self.modulus;
        for x in a.iter_mut() {
            *x = md.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

/// `a * w mod q` up to one extra `q`, i.e. in `[0, 2q)`.
#[inline(always)]
fn mul_shoup_lazy(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let q_hat = ((a as u128 * w_shoup as u128) >> 64) as u64;
    a.wrapping_mul(w).wrapping_sub(q_hat.wrapping_mul(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ntt_primes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Schoolbook product in `Z_q[X]/(X^n + 1)`.
    fn negacyclic_schoolbook(a: &[u64], b: &[u64], q: &Modulus) -> Vec<u64> {
        let n = a.len();
        let mut out = vec![0u64; n];
        for i in 0..n {
            for j in 0..n {
                let p = q.mul(a[i], b[j]);
                let k = i + j;
                if k < n {
                    out[k] = q.add(out[k], p);
                } else {
                    out[k - n] = q.sub(out[k - n], p);
                }
            }
        }
        out
    }

    #[test]
    fn roundtrip_identity() {
        let n = 2048;
        let q = Modulus::new(ntt_primes(60, 1, n, &[])[0]);
        let table = NttTable::new(q, n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let orig: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q.value())).collect();
        let mut a = orig.clone();
        table.forward(&mut a);
        assert_ne!(a, orig);
        table.inverse(&mut a);
        assert_eq!(a, orig);
    }

    #[test]
    fn pointwise_product_is_negacyclic_convolution() {
        for (n, bits) in [(16usize, 30u32), (64, 40), (256, 61)] {
            let q = Modulus::new(ntt_primes(bits, 1, n, &[])[0]);
            let table = NttTable::new(q, n);
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let a: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q.value())).collect();
            let b: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q.value())).collect();
            let expected = negacyclic_schoolbook(&a, &b, &q);

            let (mut fa, mut fb) = (a.clone(), b.clone());
            table.forward(&mut fa);
            table.forward(&mut fb);
            let mut prod: Vec<u64> = fa.iter().zip(&fb).map(|(x, y)| q.mul(*x, *y)).collect();
            table.inverse(&mut prod);
            assert_eq!(prod, expected, "n={n}");
        }
    }

    #[test]
    fn x_times_x_pow_n_minus_one_wraps_to_minus_one() {
        let n = 32;
        let q = Modulus::new(ntt_primes(40, 1, n, &[])[0]);
        let table = NttTable::new(q, n);
        let mut x = vec![0u64; n];
        x[1] = 1;
        let mut y = vec![0u64; n];
        y[n - 1] = 1;
        table.forward(&mut x);
        table.forward(&mut y);
        let mut p: Vec<u64> = x.iter().zip(&y).map(|(a, b)| q.mul(*a, *b)).collect();
        table.inverse(&mut p);
        let mut expected = vec![0u64; n];
        expected[0] = q.value() - 1;
        assert_eq!(p, expected);
    }
}
