//! Small dense and tridiagonal linear algebra.

use crate::error::{Error, Result};
use std::ops::{Add, Mul, Sub};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Real 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };
    pub const ZERO: Mat2 = Mat2 {
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(
            self.d / det,
            -self.b / det,
            -self.c / det,
            self.a / det,
        ))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn max_abs(&self) -> f64 {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }

    /// Singular values `(σ_max, σ_min)` in closed form.
    pub fn singular_values(&self) -> (f64, f64) {
        let s = self.max_abs();
        if s == 0.0 {
            return (0.0, 0.0);
        }
        let m = self.scale(1.0 / s);
        let f = m.frobenius_sq();
        let det = m.det();
        let disc = ((f - 2.0 * det) * (f + 2.0 * det)).max(0.0).sqrt();
        let smax_sq = 0.5 * (f + disc);
        let smax = smax_sq.sqrt();
        let smin = if smax > 0.0 { det.abs() / smax } else { 0.0 };
        (smax * s, smin * s)
    }

    pub fn norm(&self) -> f64 {
        self.singular_values().0
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a + r.a, self.b + r.b, self.c + r.c, self.d + r.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, r: Mat2) -> Mat2 {
        Mat2::new(self.a - r.a, self.b - r.b, self.c - r.c, self.d - r.d)
    }
}

pub fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// LDLᵀ factorization of the symmetric tridiagonal matrix `T − shift·I`,
/// without pivoting.
#[derive(Debug, Clone)]
pub struct TridiagonalLdl {
    d: Vec<f64>,
    l: Vec<f64>,
}

pub const PIVOT_GUARD: f64 = 1e-13;

impl TridiagonalLdl {
    pub fn factor(diag: &[f64], off: &[f64], shift: f64) -> Result<Self> {
        let n = diag.len();
        debug_assert!(off.len() + 1 == n || n == 0);
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut di = diag[i] - shift;
            if i > 0 {
                di -= l[i - 1] * off[i - 1];
            }
            if di.abs() < PIVOT_GUARD || !di.is_finite() {
                return Err(Error::NearSingular { row: i, pivot: di });
            }
            d.push(di);
            if i + 1 < n {
                l.push(off[i] / di);
            }
        }
        Ok(TridiagonalLdl { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.d.len();
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        for (xi, di) in x.iter_mut().zip(&self.d) {
            *xi /= di;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
    }

    /// Column `j` of `(T − shift)⁻¹`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d.len()];
        x[j] = 1.0;
        self.solve_in_place(&mut x);
        x
    }
}

/// LU factorization with partial pivoting of a tridiagonal `T − shift·I`,
/// used for inverse iteration. Tiny pivots are replaced by `tiny`.
#[derive(Debug, Clone)]
pub(crate) struct TridiagonalLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swap: Vec<bool>,
}

impl TridiagonalLu {
    pub(crate) fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        let mut swap = vec![false; n.saturating_sub(1)];
        if n == 0 {
            return TridiagonalLu {
                u0,
                u1,
                u2,
                mult,
                swap,
            };
        }
        // Current row i holds (cur0 at col i, cur1 at col i+1).
        let mut cur0 = diag[0] - shift;
        let mut cur1 = if n > 1 { off[0] } else { 0.0 };
        for i in 0..n - 1 {
            let sub = off[i];
            let nd = diag[i + 1] - shift;
            let nu = if i + 2 < n { off[i + 1] } else { 0.0 };
            if sub.abs() > cur0.abs() {
                // Swap rows i and i+1.
                swap[i] = true;
                let m = cur0 / sub;
                mult[i] = m;
                u0[i] = sub;
                u1[i] = nd;
                u2[i] = nu;
                cur0 = cur1 - m * nd;
                cur1 = -m * nu;
            } else {
                let piv = if cur0.abs() < tiny {
                    if cur0 < 0.0 {
                        -tiny
                    } else {
                        tiny
                    }
                } else {
                    cur0
                };
                let m = sub / piv;
                mult[i] = m;
                u0[i] = piv;
                u1[i] = cur1;
                u2[i] = 0.0;
                cur0 = nd - m * cur1;
                cur1 = nu;
            }
        }
        u0[n - 1] = cur0;
        for p in u0.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        TridiagonalLu {
            u0,
            u1,
            u2,
            mult,
            swap,
        }
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.u0.len();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.mult[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(diag: &[f64], off: &[f64], shift: f64) -> Vec<Vec<f64>> {
        let n = diag.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = diag[i] - shift;
            if i + 1 < n {
                a[i][i + 1] = off[i];
                a[i + 1][i] = off[i];
            }
        }
        a
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn singular_values_match_eigen_of_gram() {
        let m = Mat2::new(3.0, -1.5, 0.25, 2.0);
        let (s1, s2) = m.singular_values();
        let g = m.transpose() * m;
        let tr = g.trace();
        let det = g.det();
        let l1 = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
        let l2 = 0.5 * (tr - (tr * tr - 4.0 * det).sqrt());
        assert!((s1 * s1 - l1).abs() < 1e-12);
        assert!((s2 * s2 - l2).abs() < 1e-12);
        assert!((s1 * s2 - m.det().abs()).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_ill_conditioned_unimodular() {
        let t = 100.0;
        let m = Mat2::new(t, t, t - 1.0 / t, t);
        let (s1, s2) = m.singular_values();
        assert!((s1 * s2 - 1.0).abs() < 1e-9);
        assert!((s1 / (2.0 * t) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn ldl_column_inverts() {
        let diag = [1.0, -1.2, 0.7, -0.3, 2.0];
        let off = [1.0, -1.0, 1.0, -1.0];
        let f = TridiagonalLdl::factor(&diag, &off, 0.37).unwrap();
        let a = dense(&diag, &off, 0.37);
        for j in 0..5 {
            let x = f.column(j);
            let y = matvec(&a, &x);
            for (i, yi) in y.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((yi - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ldl_reports_singular_pivot() {
        let diag = [1.0, 1.0];
        let off = [1.0];
        assert!(matches!(
            TridiagonalLdl::factor(&diag, &off, 1.0),
            Err(Error::NearSingular { row: 0, .. })
        ));
    }

    #[test]
    fn pivoted_lu_solves() {
        let diag = [1e-3, 2.0, -0.5, 0.0, 1.5, -2.0];
        let off = [1.0, -1.0, 1.0, -1.0, 1.0];
        let lu = TridiagonalLu::factor(&diag, &off, 0.1, 1e-300);
        let a = dense(&diag, &off, 0.1);
        let b = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.25];
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let y = matvec(&a, &x);
        for (p, q) in y.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }
}
