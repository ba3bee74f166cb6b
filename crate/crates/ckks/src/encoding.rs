//! Canonical-embedding encoder.
//!
//! Slot `j` holds the evaluation of the message polynomial at
//! `zeta^(5^j mod 2N)`, where `zeta = exp(i*pi/N)`. Real coefficient
//! polynomials make the remaining N/2 evaluations the conjugates of these, so
//! only N/2 slots are independent. The transforms below are the radix-2
//! "special" FFT over the rotation group generated by 5.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    slots: usize,
    /// `5^j mod 2N` for `j < slots`.
    rot_group: Vec<usize>,
    /// `exp(2*pi*i*k / 2N)` for `k in 0..=2N`.
    ksi_pows: Vec<Complex64>,
}

impl Encoder {
    pub fn new(n: usize) -> Self {
        let m = 2 * n;
        let slots = n / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Self {
            n,
            slots,
            rot_group,
            ksi_pows,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Slot values to real polynomial coefficients (unscaled).
    pub fn slots_to_coeffs(&self, values: &[Complex64]) -> Vec<f64> {
        debug_assert!(values.len() <= self.slots);
        let mut v = vec![Complex64::new(0.0, 0.0); self.slots];
        v[..values.len()].copy_from_slice(values);
        self.fft_special_inv(&mut v);
        let half = self.n / 2;
        let mut coeffs = vec![0.0; self.n];
        for (i, z) in v.iter().enumerate() {
            coeffs[i] = z.re;
            coeffs[i + half] = z.im;
        }
        coeffs
    }

    /// Real polynomial coefficients (unscaled) to slot values.
    pub fn coeffs_to_slots(&self, coeffs: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(coeffs.len(), self.n);
        let half = self.n / 2;
        let mut v: Vec<Complex64> = (0..self.slots)
            .map(|i| Complex64::new(coeffs[i], coeffs[i + half]))
            .collect();
        self.fft_special(&mut v);
        v
    }

    fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * m / lenq;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.n;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * m / lenq;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }
}

fn bit_reverse_permute<T>(a: &mut [T]) {
    let n = a.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
}
