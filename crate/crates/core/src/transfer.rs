//! Transfer matrices of the two first-order systems and their products.

use crate::disorder::DisorderPath;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Mat2};
use crate::model::EnergyContext;
use serde::{Deserialize, Serialize};

/// Which first-order system a transfer matrix propagates.
///
/// `First` maps `Φ_n = (φ⁺_n, φ⁻_n)` to `Φ_{n+1}` using `V_1(n)` and
/// `V_2(n+1)`. `Second` maps `Φ'_n = (φ⁻_n, φ⁺_{n−1})` to `Φ'_{n+1}` using
/// `V_1(n)` and `V_2(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub matrix: Mat2,
    pub site: usize,
    pub system: System,
}

/// Transfer matrix from the local potentials `v1 = V_1(n)` and `v2`
/// (`V_2(n+1)` for the first system, `V_2(n)` for the second).
#[inline]
pub fn transfer_from_potential(energy: f64, m: f64, v1: f64, v2: f64, system: System) -> Mat2 {
    let q1 = m - energy + v1;
    let q2 = m + energy - v2;
    match system {
        System::First => Mat2::new(q1 * q2 + 1.0, q2, q1, 1.0),
        System::Second => Mat2::new(q1 * q2 + 1.0, q1, q2, 1.0),
    }
}

/// Largest site whose potential enters `T_{ω,n}`.
pub fn last_site_used(n: usize, system: System) -> usize {
    match system {
        System::First => n + 1,
        System::Second => n,
    }
}

/// `T_{ω,n}` at an arbitrary real energy.
pub fn transfer_raw(
    energy: f64,
    m: f64,
    path: &DisorderPath,
    n: usize,
    system: System,
) -> Result<Mat2> {
    if n == 0 {
        return Err(Error::SiteOutOfRange {
            site: 0,
            lo: 1,
            hi: path.len(),
        });
    }
    path.require(last_site_used(n, system))?;
    let v2 = match system {
        System::First => path.v2(n + 1),
        System::Second => path.v2(n),
    };
    Ok(transfer_from_potential(energy, m, path.v1(n), v2, system))
}

pub fn transfer_at(
    ctx: &EnergyContext,
    path: &DisorderPath,
    n: usize,
    system: System,
) -> Result<TransferMatrix> {
    Ok(TransferMatrix {
        matrix: transfer_raw(ctx.energy, ctx.m, path, n, system)?,
        site: n,
        system,
    })
}

/// Free transfer matrix `T` (zero potential).
pub fn free_transfer(ctx: &EnergyContext, system: System) -> Mat2 {
    transfer_from_potential(ctx.energy, ctx.m, 0.0, 0.0, system)
}

/// Matrices `(A_1, A_2, A_3)` with
/// `T_{ω,n} = T + V_1 A_1 + V_2 A_2 + V_1 V_2 A_3`.
pub fn perturbation_matrices(ctx: &EnergyContext, system: System) -> [Mat2; 3] {
    let (p1, p2) = (ctx.p1, ctx.p2);
    match system {
        System::First => [
            Mat2::new(p2, 0.0, 1.0, 0.0),
            Mat2::new(-p1, -1.0, 0.0, 0.0),
            Mat2::new(-1.0, 0.0, 0.0, 0.0),
        ],
        System::Second => [
            Mat2::new(p2, 1.0, 0.0, 0.0),
            Mat2::new(-p1, 0.0, -1.0, 0.0),
            Mat2::new(-1.0, 0.0, 0.0, 0.0),
        ],
    }
}

const RESCALE_HI: f64 = 1e8;
const RESCALE_LO: f64 = 1e-8;

/// Product `T_{n−1} ⋯ T_u` stored as `exp(log_scale) · unit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledProduct {
    pub unit: Mat2,
    pub log_scale: f64,
    pub system: System,
    pub start: usize,
    pub end: usize,
}

impl ScaledProduct {
    pub fn identity(system: System, start: usize) -> Self {
        ScaledProduct {
            unit: Mat2::IDENTITY,
            log_scale: 0.0,
            system,
            start,
            end: start,
        }
    }

    /// Left-multiplies by the next transfer matrix `T_{end}`.
    #[inline]
    pub fn push(&mut self, t: Mat2) {
        self.unit = t * self.unit;
        self.end += 1;
        let s = self.unit.max_abs();
        if !(RESCALE_LO..=RESCALE_HI).contains(&s) && s > 0.0 {
            self.unit = self.unit.scale(1.0 / s);
            self.log_scale += s.ln();
        }
    }

    pub fn log_norm(&self) -> f64 {
        self.log_scale + self.unit.norm().ln()
    }

    /// Logarithms of both singular values. Transfer matrices are unimodular,
    /// so the smaller one is `−log σ_max` exactly.
    pub fn log_singular_values(&self) -> (f64, f64) {
        let a = self.log_norm();
        (a, -a)
    }

    /// `log |det|` of the product.
    pub fn log_abs_det(&self) -> f64 {
        2.0 * self.log_scale + self.unit.det().abs().ln()
    }

    /// `log ‖A v‖` together with the direction of `A v`.
    pub fn apply_log(&self, v: [f64; 2]) -> (f64, [f64; 2]) {
        let w = self.unit.apply(v);
        let r = norm2(w);
        (self.log_scale + r.ln(), [w[0] / r, w[1] / r])
    }

    /// Unscaled product; overflows for long ranges.
    pub fn matrix(&self) -> Mat2 {
        self.unit.scale(self.log_scale.exp())
    }
}

/// `T_{[u,n]} = T_{ω,n−1} ⋯ T_{ω,u}` at an arbitrary real energy.
pub fn product_raw(
    energy: f64,
    m: f64,
    path: &DisorderPath,
    u: usize,
    n: usize,
    system: System,
) -> Result<ScaledProduct> {
    if u == 0 || n < u {
        return Err(Error::SiteOutOfRange {
            site: u,
            lo: 1,
            hi: n.max(1),
        });
    }
    if n > u {
        path.require(last_site_used(n - 1, system))?;
    }
    let mut p = ScaledProduct::identity(system, u);
    for j in u..n {
        let v2 = match system {
            System::First => path.v2(j + 1),
            System::Second => path.v2(j),
        };
        p.push(transfer_from_potential(energy, m, path.v1(j), v2, system));
    }
    Ok(p)
}

pub fn product(
    ctx: &EnergyContext,
    path: &DisorderPath,
    u: usize,
    n: usize,
    system: System,
) -> Result<ScaledProduct> {
    product_raw(ctx.energy, ctx.m, path, u, n, system)
}

/// Vector `A φ` propagated one transfer matrix at a time with a running
/// logarithmic scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorWalker {
    pub direction: [f64; 2],
    pub log_norm: f64,
    pub site: usize,
}

impl VectorWalker {
    pub fn new(v: [f64; 2], site: usize) -> Self {
        let r = norm2(v);
        VectorWalker {
            direction: [v[0] / r, v[1] / r],
            log_norm: r.ln(),
            site,
        }
    }

    #[inline]
    pub fn push(&mut self, t: Mat2) {
        let w = t.apply(self.direction);
        let r = norm2(w);
        self.direction = [w[0] / r, w[1] / r];
        self.log_norm += r.ln();
        self.site += 1;
    }
}

/// Two-angle bracket on `log ‖A‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBracket {
    pub log_lower: f64,
    pub log_upper: f64,
}

/// Bounds `‖A‖` from its action on two unit vectors at angles `θ1`, `θ2`:
/// `max_i ‖A θ̂_i‖ ≤ ‖A‖ ≤ (‖A θ̂_1‖ + ‖A θ̂_2‖) / |sin(θ1 − θ2)|`.
pub fn norm_from_two_angles(a: &ScaledProduct, theta1: f64, theta2: f64) -> Result<NormBracket> {
    let s = (theta1 - theta2).sin().abs();
    if s < 1e-12 {
        return Err(Error::InvalidParameter(
            "angles must not be collinear".into(),
        ));
    }
    let (l1, _) = a.apply_log([theta1.cos(), theta1.sin()]);
    let (l2, _) = a.apply_log([theta2.cos(), theta2.sin()]);
    let hi = l1.max(l2);
    let lo = l1.min(l2);
    Ok(NormBracket {
        log_lower: hi,
        log_upper: hi + (1.0 + (lo - hi).exp()).ln() - s.ln(),
    })
}

/// Generalized eigenfunction `(φ⁺_j, φ⁻_j)` for `j = 0..=n` with
/// `φ⁺_0 = 0`, `φ⁻_1 = 1`, computed directly from the two-component
/// recurrences. Index 0 holds `(0, NaN)`.
pub fn generalized_eigenfunction(
    energy: f64,
    m: f64,
    path: &DisorderPath,
    n: usize,
) -> Result<Vec<[f64; 2]>> {
    path.require(n)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push([0.0, f64::NAN]);
    let mut minus = 1.0;
    let mut plus_prev = 0.0;
    for j in 1..=n {
        let q2 = m + energy - path.v2(j);
        let plus = plus_prev + q2 * minus;
        out.push([plus, minus]);
        let q1 = m - energy + path.v1(j);
        minus += q1 * plus;
        plus_prev = plus;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_path, DistributionSpec};
    use crate::model::{energy_context, Exponent, ModelParams};
    use proptest::prelude::*;

    fn close(a: Mat2, b: Mat2, tol: f64) -> bool {
        (a - b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
    }

    #[test]
    fn free_matrix_reference_values() {
        let ctx = energy_context(1.0, 0.0).unwrap();
        let t = free_transfer(&ctx, System::First);
        assert_eq!(t, Mat2::new(0.0, 1.0, -1.0, 1.0));
        assert!((t.trace() - 1.0).abs() < 1e-15);
        assert!((t.trace() + 2.0 * (2.0 * ctx.k).cos()).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn transfer_structure(m in 0.0f64..2.0, t in 0.01f64..0.99, v1 in -2.0f64..2.0, v2 in -2.0f64..2.0) {
            let lo = m;
            let hi = (m * m + 4.0f64).sqrt();
            let e = lo + t * (hi - lo);
            let ctx = energy_context(e, m).unwrap();
            for system in [System::First, System::Second] {
                let tw = transfer_from_potential(e, m, v1, v2, system);
                prop_assert!((tw.det() - 1.0).abs() < 1e-12 * (1.0 + tw.max_abs().powi(2)));
                let [a1, a2, a3] = perturbation_matrices(&ctx, system);
                let rebuilt = free_transfer(&ctx, system) + a1.scale(v1) + a2.scale(v2) + a3.scale(v1 * v2);
                prop_assert!(close(tw, rebuilt, 1e-12));
                let t0 = free_transfer(&ctx, system);
                prop_assert!((t0.trace() + 2.0 * (2.0 * ctx.k).cos()).abs() < 1e-12);
            }
        }
    }

    fn path() -> DisorderPath {
        let p = ModelParams::new(0.6, 0.8, Exponent::HALF).unwrap();
        sample_path(&p, &DistributionSpec::default(), 400, 17)
    }

    #[test]
    fn first_system_reproduces_recurrences() {
        let path = path();
        let (e, m) = (1.3, 0.6);
        let phi = generalized_eigenfunction(e, m, &path, 60).unwrap();
        for n in 1..59 {
            let t = transfer_raw(e, m, &path, n, System::First).unwrap();
            let next = t.apply(phi[n]);
            let scale = 1.0 + norm2(phi[n + 1]);
            assert!((next[0] - phi[n + 1][0]).abs() < 1e-11 * scale);
            assert!((next[1] - phi[n + 1][1]).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn second_system_reproduces_recurrences() {
        let path = path();
        let (e, m) = (-1.1, 0.6);
        let phi = generalized_eigenfunction(e, m, &path, 60).unwrap();
        for n in 1..59 {
            let t = transfer_raw(e, m, &path, n, System::Second).unwrap();
            let cur = [phi[n][1], phi[n - 1][0]];
            let next = t.apply(cur);
            let expect = [phi[n + 1][1], phi[n][0]];
            let scale = 1.0 + norm2(expect);
            assert!((next[0] - expect[0]).abs() < 1e-11 * scale);
            assert!((next[1] - expect[1]).abs() < 1e-11 * scale);
        }
    }

    #[test]
    fn both_systems_agree_from_any_start() {
        let path = path();
        let (e, m) = (1.3, 0.6);
        let u = 7;
        let phi0 = [0.3, -1.7];
        let first = product_raw(e, m, &path, u, u + 40, System::First).unwrap();
        let v = first.matrix().apply(phi0);
        // Second system starts from (φ⁻_{u+1}, φ⁺_u).
        let t1 = transfer_raw(e, m, &path, u, System::First).unwrap();
        let next = t1.apply(phi0);
        let start = [next[1], phi0[0]];
        let second = product_raw(e, m, &path, u + 1, u + 40, System::Second).unwrap();
        let w = second.matrix().apply(start);
        let last_first = product_raw(e, m, &path, u, u + 39, System::First)
            .unwrap()
            .matrix()
            .apply(phi0);
        let scale = 1.0 + norm2(v);
        assert!((w[0] - v[1]).abs() < 1e-10 * scale);
        assert!((w[1] - last_first[0]).abs() < 1e-10 * scale);
    }

    #[test]
    fn scaled_product_matches_naive() {
        let path = path();
        let ctx = energy_context(1.3, 0.6).unwrap();
        let p = product(&ctx, &path, 3, 30, System::First).unwrap();
        let mut naive = Mat2::IDENTITY;
        for j in 3..30 {
            naive = transfer_at(&ctx, &path, j, System::First).unwrap().matrix * naive;
        }
        assert!(close(p.matrix(), naive, 1e-12));
        assert!((p.log_norm() - naive.norm().ln()).abs() < 1e-12);
        assert!(p.log_abs_det().abs() < 1e-8);
    }

    #[test]
    fn long_product_stays_finite() {
        let p = ModelParams::new(0.0, 1.5, Exponent::value(0.1).unwrap()).unwrap();
        let path = sample_path(&p, &DistributionSpec::default(), 20001, 3);
        let ctx = energy_context(1.0, 0.0).unwrap();
        let prod = product(&ctx, &path, 1, 20000, System::First).unwrap();
        let (a, _) = prod.log_singular_values();
        assert!(a.is_finite() && a > 50.0);
        let direct = prod.unit.singular_values().0.ln() + prod.log_scale;
        assert_eq!(a, direct);
    }

    #[test]
    fn empty_range_is_identity() {
        let path = path();
        let ctx = energy_context(1.3, 0.6).unwrap();
        let p = product(&ctx, &path, 5, 5, System::First).unwrap();
        assert_eq!(p.matrix(), Mat2::IDENTITY);
    }

    #[test]
    fn short_path_rejected() {
        let path = path();
        let ctx = energy_context(1.3, 0.6).unwrap();
        assert!(product(&ctx, &path, 1, 400, System::First).is_ok());
        assert!(matches!(
            product(&ctx, &path, 1, 401, System::First),
            Err(Error::PathTooShort { .. })
        ));
        assert!(product(&ctx, &path, 1, 401, System::Second).is_ok());
    }

    #[test]
    fn norm_bracket_contains_norm() {
        let path = path();
        let ctx = energy_context(1.3, 0.6).unwrap();
        for (a, b) in [(0.0, 1.0), (0.2, 2.9), (1.0, 1.3)] {
            let p = product(&ctx, &path, 1, 200, System::First).unwrap();
            let br = norm_from_two_angles(&p, a, b).unwrap();
            let ln = p.log_norm();
            assert!(br.log_lower <= ln + 1e-12 && ln <= br.log_upper + 1e-12);
        }
    }
}
