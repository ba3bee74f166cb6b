//! Word-size modular arithmetic: Barrett reduction for general products,
//! Shoup multiplication for fixed operands, and NTT-friendly prime search.

/// Largest modulus bit-length supported by the reduction routines.
pub const MAX_MODULUS_BITS: u32 = 62;

/// A prime modulus below 2^62 with precomputed Barrett constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    bits: u32,
    barrett: u64,
    /// `2^64 mod q`.
    r64: u64,
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value > 2, "modulus too small");
        let bits = 64 - value.leading_zeros();
        assert!(bits <= MAX_MODULUS_BITS, "modulus exceeds {MAX_MODULUS_BITS} bits");
        let barrett = ((1u128 << (2 * bits)) / value as u128) as u64;
        let r64 = ((1u128 << 64) % value as u128) as u64;
        Self {
            value,
            bits,
            barrett,
            r64,
        }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Reduces `x < q^2`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let k = self.bits;
        let approx = ((x >> (k - 1)) as u64 as u128 * self.barrett as u128) >> (k + 1);
        let mut r = (x - approx * self.value as u128) as u64;
        while r >= self.value {
            r -= self.value;
        }
        r
    }

    /// Reduces any 128-bit value.
    #[inline]
    pub fn reduce_wide(&self, x: u128) -> u64 {
        let hi = ((x >> 64) as u64) % self.value;
        let lo = (x as u64) % self.value;
        self.add(self.mul(hi, self.r64), lo)
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.value
    }

    /// Maps a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = self.reduce(x.unsigned_abs());
        if x < 0 && r != 0 {
            self.value - r
        } else {
            r
        }
    }

    pub fn reduce_i128(&self, x: i128) -> u64 {
        let q = self.value as i128;
        let r = x.rem_euclid(q);
        r as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.value {
            s - self.value
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.value - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Precomputes `floor(w * 2^64 / q)` for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let q_hat = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(q_hat.wrapping_mul(self.value));
        if r >= self.value {
            r - self.value
        } else {
            r
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse via Fermat; the modulus is prime.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let a = self.reduce(a);
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.value - 2))
        }
    }

    /// Centered representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'outer: for a in WITNESSES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Returns `count` distinct primes of exactly `bits` bits with `p ≡ 1 (mod 2n)`,
/// scanning downward from `2^bits`, skipping anything in `exclude`.
pub fn ntt_primes(bits: u32, count: usize, ring_dimension: usize, exclude: &[u64]) -> Vec<u64> {
    assert!((2..=MAX_MODULUS_BITS).contains(&bits));
    let step = 2 * ring_dimension as u64;
    let upper = 1u64 << bits;
    let lower = 1u64 << (bits - 1);
    let mut candidate = (upper - 1) / step * step + 1;
    if candidate >= upper {
        candidate -= step;
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count && candidate > lower {
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    assert_eq!(out.len(), count, "not enough {bits}-bit NTT primes");
    out
}

/// Finds a generator of the order-`2n` subgroup of `Z_q^*`, i.e. a primitive
/// `2n`-th root of unity.
pub fn primitive_root_2n(modulus: &Modulus, ring_dimension: usize) -> u64 {
    let q = modulus.value();
    let order = 2 * ring_dimension as u64;
    assert_eq!((q - 1) % order, 0, "modulus is not NTT friendly");
    let cofactor = (q - 1) / order;
    for g in 2..q {
        let root = modulus.pow(g, cofactor);
        // order divides 2n; it is exactly 2n iff root^n = -1
        if modulus.pow(root, ring_dimension as u64) == q - 1 {
            return root;
        }
    }
    unreachable!("prime field always has a primitive root")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_primes() {
        let primes: Vec<u64> = (0..50).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]
        );
        assert!(is_prime(0xffff_ffff_ffff_ffc5)); // 2^64 - 59
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2,3,5,7
    }

    #[test]
    fn ntt_primes_are_friendly_and_distinct() {
        let ps = ntt_primes(40, 4, 8192, &[]);
        for &p in &ps {
            assert_eq!(p % 16384, 1);
            assert_eq!(64 - p.leading_zeros(), 40);
            assert!(is_prime(p));
        }
        let mut dedup = ps.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
        let more = ntt_primes(40, 1, 8192, &ps);
        assert!(!ps.contains(&more[0]));
    }

    #[test]
    fn root_has_exact_order() {
        let q = Modulus::new(ntt_primes(50, 1, 1024, &[])[0]);
        let w = primitive_root_2n(&q, 1024);
        assert_eq!(q.pow(w, 2048), 1);
        assert_eq!(q.pow(w, 1024), q.value() - 1);
    }

    proptest! {
        #[test]
        fn barrett_matches_u128_rem(a in any::<u64>(), b in any::<u64>(), bits in 20u32..=62) {
            let p = ntt_primes(bits, 1, 2048.min(1 << (bits - 3)), &[])[0];
            let m = Modulus::new(p);
            let (a, b) = (a % p, b % p);
            prop_assert_eq!(m.mul(a, b), ((a as u128 * b as u128) % p as u128) as u64);
            let ws = m.shoup(b);
            prop_assert_eq!(m.mul_shoup(a, b, ws), m.mul(a, b));
            let wide = ((a as u128) << 64) | b as u128;
            prop_assert_eq!(m.reduce_wide(wide) as u128, wide % p as u128);
        }

        #[test]
        fn inverse_roundtrip(a in 1u64..u64::MAX) {
            let m = Modulus::new(ntt_primes(60, 1, 8192, &[])[0]);
            let a = m.reduce(a);
            prop_assume!(a != 0);
            prop_assert_eq!(m.mul(a, m.inv(a).unwrap()), 1);
        }
    }
}
