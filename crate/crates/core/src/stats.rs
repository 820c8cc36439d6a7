//! Estimators shared by the Monte Carlo drivers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    wls(x, y, &vec![1.0; x.len()])
}

/// Weighted least squares with weights `w` (typically inverse variances).
pub fn wls(x: &[f64], y: &[f64], w: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - xm;
        let dy = y[i] - ym;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let slope_se = (ss_res / dof / sxx).sqrt();
    LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
    }
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of the means of `groups` contiguous blocks.
pub fn median_of_means(xs: &[f64], groups: usize) -> f64 {
    let g = groups.clamp(1, xs.len().max(1));
    let size = xs.len() / g;
    if size == 0 {
        return median(xs);
    }
    let means: Vec<f64> = (0..g)
        .map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    median(&means)
}

/// `log(mean(exp(l)))` without overflow.
pub fn log_mean_exp(logs: &[f64]) -> f64 {
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let s: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
    mx + (s / logs.len() as f64).ln()
}

/// Uniform index in `0..n`.
fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Percentile bootstrap interval of `stat` over resamples of `n` replica
/// indices.
pub fn bootstrap_ci<F>(n: usize, resamples: usize, seed: u64, level: f64, stat: F) -> (f64, f64)
where
    F: Fn(&[usize]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    let mut vals = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = below(&mut rng, n);
        }
        let v = stat(&idx);
        if v.is_finite() {
            vals.push(v);
        }
    }
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    vals.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| {
        let pos = p * (vals.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        vals[lo] + (pos - lo as f64) * (vals[hi] - vals[lo])
    };
    let a = (1.0 - level) / 2.0;
    (q(a), q(1.0 - a))
}
