//! Symmetric tridiagonal eigensolver: implicit QL for eigenvalues, inverse
//! iteration for eigenvectors.

use crate::error::{Error, Result};
use crate::linalg::TridiagonalLu;
use crate::model::{BoxDescriptor, TridiagonalOperator};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub const DEFAULT_DIMENSION_CAP: usize = 6000;
const QL_MAX_SWEEPS: usize = 60;
const INVERSE_ITERATION_MAX: usize = 8;
/// Eigenvalues closer than this (relative to the norm) are reorthogonalized
/// against each other.
const CLUSTER_GAP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[j]` belongs to `eigenvalues[j]`, unit norm.
    pub eigenvectors: Vec<Vec<f64>>,
    pub boxd: BoxDescriptor,
    /// True when every eigenpair of the box is present.
    pub complete: bool,
    pub norm: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.boxd.dim()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest `‖D v_j − E_j v_j‖` relative to the operator norm.
    pub fn max_residual(&self, op: &TridiagonalOperator) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(&e, v)| residual(op, e, v))
            .fold(0.0, f64::max)
            / self.norm.max(f64::MIN_POSITIVE)
    }

    /// `max |VᵀV − I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let k = self.len();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in i..k {
                let d = dot(&self.eigenvectors[i], &self.eigenvectors[j])
                    - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(op: &TridiagonalOperator, e: f64, v: &[f64]) -> f64 {
    let dv = op.apply(v);
    dv.iter()
        .zip(v)
        .map(|(a, b)| (a - e * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// All eigenvalues, ascending, via implicit-shift QL.
pub fn eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::ConvergenceFailure { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn start_vector(n: usize, j: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + j as u64);
    (0..n)
        .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let s = dot(v, v).sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    s
}

/// Eigenvectors for `values` (ascending, taken from the full spectrum) by
/// inverse iteration. `index_base` offsets the reported index on failure.
fn eigenvectors(
    op: &TridiagonalOperator,
    values: &[f64],
    norm: f64,
    index_base: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = op.dim();
    let scale = norm.max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;
    let tol = 1e-11 * scale;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut cluster_start = 0;
    let mut last_shift = f64::NEG_INFINITY;
    for (j, &ev) in values.iter().enumerate() {
        if j > 0 && ev - values[j - 1] > CLUSTER_GAP * scale {
            cluster_start = j;
        }
        let mut shift = ev;
        if j > cluster_start && shift - last_shift < 10.0 * tiny {
            shift = last_shift + 10.0 * tiny;
        }
        last_shift = shift;
        let lu = TridiagonalLu::factor(&op.diag, &op.off, shift, tiny);
        let mut v = start_vector(n, index_base + j);
        normalize(&mut v);
        let mut done = false;
        for it in 0..INVERSE_ITERATION_MAX {
            lu.solve_in_place(&mut v);
            for prev in &out[cluster_start..j] {
                let c = dot(&v, prev);
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= c * p);
            }
            normalize(&mut v);
            if it >= 1 && residual(op, ev, &v) <= tol {
                done = true;
                break;
            }
        }
        if !done && residual(op, ev, &v) > 1e-9 * scale {
            return Err(Error::ConvergenceFailure {
                index: index_base + j,
            });
        }
        out.push(v);
    }
    Ok(out)
}

fn check_cap(op: &TridiagonalOperator, cap: usize) -> Result<()> {
    if op.dim() > cap {
        return Err(Error::DimensionCap { dim: op.dim(), cap });
    }
    Ok(())
}

pub fn diagonalize(op: &TridiagonalOperator) -> Result<SpectralDecomposition> {
    diagonalize_capped(op, DEFAULT_DIMENSION_CAP)
}

pub fn diagonalize_capped(op: &TridiagonalOperator, cap: usize) -> Result<SpectralDecomposition> {
    check_cap(op, cap)?;
    let norm = op.norm_bound();
    let values = eigenvalues(&op.diag, &op.off)?;
    let vectors = eigenvectors(op, &values, norm, 0)?;
    Ok(SpectralDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
        boxd: op.boxd,
        complete: true,
        norm,
    })
}

/// Eigenpairs with eigenvalue in `[lo, hi]`.
pub fn diagonalize_window(
    op: &TridiagonalOperator,
    lo: f64,
    hi: f64,
    cap: usize,
) -> Result<SpectralDecomposition> {
    check_cap(op, cap)?;
    let norm = op.norm_bound();
    let all = eigenvalues(&op.diag, &op.off)?;
    // Keep one neighbour on each side so cluster orthogonalization sees it.
    let first = all.partition_point(|&e| e < lo);
    let last = all.partition_point(|&e| e <= hi);
    let a = first.saturating_sub(1);
    let b = (last + 1).min(all.len());
    let vectors = eigenvectors(op, &all[a..b], norm, a)?;
    let eigenvalues = all[first..last].to_vec();
    let eigenvectors = vectors[first - a..last - a].to_vec();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        boxd: op.boxd,
        complete: first == 0 && last == all.len(),
        norm,
    })
}
