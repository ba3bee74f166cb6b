use medclaim_ckks::OddCubic;
use serde::{Deserialize, Serialize};

use super::{sigmoid, ModelError};

/// Least-squares `c0 + c1*x + c3*x^3` approximation of the logistic
/// function on `[-interval, interval]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit {
    pub c0: f64,
    pub c1: f64,
    pub c3: f64,
    /// Largest absolute deviation from the sigmoid over the fit grid.
    pub max_err: f64,
    pub interval: f64,
    pub grid_points: usize,
}

impl SigmoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.cubic().eval(x)
    }

    pub fn cubic(&self) -> OddCubic {
        OddCubic {
            c0: self.c0,
            c1: self.c1,
            c3: self.c3,
        }
    }
}

pub fn fit_sigmoid_poly(interval: f64, grid_points: usize) -> Result<SigmoidFit, ModelError> {
    let coeffs = fit_powers(&[0, 1, 3], interval, grid_points)?;
    let (c0, c1, c3) = (coeffs[0], coeffs[1], coeffs[2]);
    let max_err = grid(interval, grid_points)
        .map(|x| (c0 + c1 * x + c3 * x * x * x - sigmoid(x)).abs())
        .fold(0.0, f64::max);
    Ok(SigmoidFit {
        c0,
        c1,
        c3,
        max_err,
        interval,
        grid_points,
    })
}

fn grid(interval: f64, points: usize) -> impl Iterator<Item = f64> {
    let step = 2.0 * interval / (points - 1) as f64;
    (0..points).map(move |i| -interval + step * i as f64)
}

/// Least-squares coefficients of `sum_k c_k x^powers[k]` against the
/// sigmoid on a uniform grid, via Householder QR of the design matrix.
pub fn fit_powers(powers: &[i32], interval: f64, grid_points: usize) -> Result<Vec<f64>, ModelError> {
    if !(interval.is_finite() && interval > 0.0) {
        return Err(ModelError::InvalidInterval(interval));
    }
    let k = powers.len();
    if grid_points < k.max(2) {
        return Err(ModelError::InvalidGrid {
            needed: k.max(2),
            found: grid_points,
        });
    }
    let xs: Vec<f64> = grid(interval, grid_points).collect();
    let mut cols: Vec<Vec<f64>> = powers
        .iter()
        .map(|&p| xs.iter().map(|x| x.powi(p)).collect())
        .collect();
    let mut rhs: Vec<f64> = xs.iter().map(|&x| sigmoid(x)).collect();
    let m = xs.len();

    for j in 0..k {
        let norm = cols[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if cols[j][j] > 0.0 { -norm } else { norm };
        let mut v = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vv;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= f * vi;
            }
        };
        for col in cols.iter_mut().skip(j) {
            reflect(&mut col[j..m]);
        }
        reflect(&mut rhs[j..m]);
    }

    let mut c = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        for jj in i + 1..k {
            acc -= cols[jj][i] * c[jj];
        }
        c[i] = acc / cols[i][i];
    }
    Ok(c)
}
