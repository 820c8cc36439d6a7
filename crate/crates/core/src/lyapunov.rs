//! Lyapunov exponent: closed form, Monte Carlo estimators and the
//! fourth-moment boundedness probe for fast-decaying potentials.

use crate::disorder::{sample_replica, DistributionSpec};
use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::model::{energy_context, AlphaClass, EnergyContext, Exponent, ModelParams};
use crate::prufer::{check_excluded_k, Multiplier, PruferState, DEGENERATE_GUARD};
use crate::stats::{bootstrap_ci, log_mean_exp, mean_se, median_of_means};
use crate::transfer::{transfer_from_potential, ScaledProduct, System};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// `β = λ²(p₁² + p₂²) / (8 sin²2k)` without the band-edge guard.
pub fn beta_value(ctx: &EnergyContext, lambda: f64) -> f64 {
    lambda * lambda * (ctx.p1 * ctx.p1 + ctx.p2 * ctx.p2) / (8.0 * ctx.sin_2k * ctx.sin_2k)
}

pub fn beta_closed_form(ctx: &EnergyContext, lambda: f64) -> Result<f64> {
    ctx.require_analytic()?;
    Ok(beta_value(ctx, lambda))
}

/// `s_N = Σ_{j=1}^{N} j^{−2α}` by compensated summation.
pub fn decay_normalizer(alpha: Exponent, n: usize) -> f64 {
    let mut s = CompensatedSum::new();
    match alpha {
        Exponent::Ratio { num: 1, den: 2 } => (1..=n).for_each(|j| s.add(1.0 / j as f64)),
        _ => {
            let p = -2.0 * alpha.as_f64();
            (1..=n).for_each(|j| s.add((j as f64).powf(p)));
        }
    }
    s.value()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean of `log‖T_{[1,N+1]}‖ / s_N` over replicas.
    pub beta_hat: f64,
    pub stderr: f64,
    pub median_of_means: f64,
    /// Mean of `log R_{N+1} / s_N` along the Prüfer recursion.
    pub beta_hat_prufer: f64,
    pub stderr_prufer: f64,
    pub n: usize,
    pub m: usize,
    pub s_n: f64,
    pub closed_form: Option<f64>,
    pub samples: Vec<f64>,
    pub samples_prufer: Vec<f64>,
}

impl LyapunovEstimate {
    /// `(β̂ − β̂_prufer) / √(stderr² + stderr_prufer²)`.
    pub fn estimator_gap_z(&self) -> f64 {
        let joint = self.stderr.hypot(self.stderr_prufer);
        let gap = self.beta_hat - self.beta_hat_prufer;
        if joint > 0.0 {
            gap / joint
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Returns `(log‖T_{[1,N+1]}‖, log R_{N+1})` for one replica.
fn one_replica(
    ctx: &EnergyContext,
    params: &ModelParams,
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
    replica: u64,
) -> Result<(f64, f64)> {
    let path = sample_replica(params, spec, n + 1, seed, replica);
    let mult = Multiplier::new(ctx);
    let mut prod = ScaledProduct::identity(System::First, 1);
    let mut state = PruferState::from_angle(ctx, 0.0, System::First);
    let mut log_r = CompensatedSum::new();
    for j in 1..=n {
        let v1 = path.v1(j);
        let v2 = path.v2(j + 1);
        prod.push(transfer_from_potential(
            ctx.energy,
            ctx.m,
            v1,
            v2,
            System::First,
        ));
        let (re, im) = mult.eval(state.phase, v1, v2, System::First);
        let modulus = re.hypot(im);
        if modulus < DEGENERATE_GUARD {
            return Err(Error::DegenerateMultiplier { site: j, modulus });
        }
        log_r.add(modulus.ln());
        state.phase = crate::model::wrap_angle(state.phase + im.atan2(re) - 2.0 * ctx.k);
    }
    Ok((prod.log_norm(), log_r.value()))
}

/// Monte Carlo estimate of `β` from `m` independent replicas of length
/// `n + 1` drawn from `seed`.
pub fn estimate_beta(
    ctx: &EnergyContext,
    params: &ModelParams,
    spec: &DistributionSpec,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if params.alpha_class() == AlphaClass::Supercritical {
        return Err(Error::SubcriticalOnly {
            alpha: params.alpha.as_f64(),
        });
    }
    ctx.require_analytic()?;
    check_excluded_k(ctx)?;
    if n < 1 || m < 2 {
        return Err(Error::InvalidParameter(
            "need n >= 1 and at least two replicas".into(),
        ));
    }
    let s_n = decay_normalizer(params.alpha, n);
    let results: Vec<Result<(f64, f64)>> = (0..m as u64)
        .into_par_iter()
        .map(|r| one_replica(ctx, params, spec, n, seed, r))
        .collect();
    let mut samples = Vec::with_capacity(m);
    let mut samples_prufer = Vec::with_capacity(m);
    for r in results {
        let (a, b) = r?;
        samples.push(a / s_n);
        samples_prufer.push(b / s_n);
    }
    let (beta_hat, stderr) = mean_se(&samples);
    let (beta_hat_prufer, stderr_prufer) = mean_se(&samples_prufer);
    let groups = ((m as f64).sqrt().round() as usize).max(1);
    Ok(LyapunovEstimate {
        beta_hat,
        stderr,
        median_of_means: median_of_means(&samples, groups),
        beta_hat_prufer,
        stderr_prufer,
        n,
        m,
        s_n,
        closed_form: Some(beta_value(ctx, params.lambda)),
        samples,
        samples_prufer,
    })
}

/// Raw even moments `(E V², E V⁴)`, the latter `None` when infinite.
fn even_moments(spec: &DistributionSpec, scale: f64) -> (f64, Option<f64>) {
    let s2 = scale * scale;
    (s2, spec.abs_moment(4).map(|m4| m4 * s2 * s2))
}

/// `sup_θ E|multiplier|⁴` for one step with potential scales `sigma1`,
/// `sigma2`, computed exactly from the moments of a symmetric law.
pub fn step_fourth_moment_sup(
    ctx: &EnergyContext,
    spec: &DistributionSpec,
    sigma1: f64,
    sigma2: f64,
) -> Option<f64> {
    let (a2, a4) = even_moments(spec, sigma1);
    let (b2, b4) = even_moments(spec, sigma2);
    let (a4, b4) = (a4?, b4?);
    let mu_a = [1.0, 0.0, a2, 0.0, a4];
    let mu_b = [1.0, 0.0, b2, 0.0, b4];
    let s2 = ctx.sin_2k;
    let (sk, ck) = (ctx.sin_k, ctx.cos_k);
    let (p1, p2) = (ctx.p1, ctx.p2);
    let grid = 720;
    let mut best: f64 = 0.0;
    for g in 0..grid {
        let th = std::f64::consts::PI * g as f64 / grid as f64;
        let c = th.cos();
        let cm = (th - ctx.k).cos();
        let sm = (th - ctx.k).sin();
        // Coefficients of (1 + Γ) in V1^i V2^j.
        let mut coef = [[0.0f64; 3]; 3];
        coef[0][0] = 1.0;
        coef[1][0] = -p2 / s2 * (2.0 * th).sin();
        coef[0][1] = p1 / s2 * (2.0 * (th - ctx.k)).sin();
        coef[2][0] = p2 * p2 / (s2 * s2) * c * c;
        coef[0][2] = p1 * p1 / (s2 * s2) * cm * cm;
        coef[1][1] = 2.0 / sk * c * sm - 2.0 * p1 * p2 / (s2 * s2) * ck * c * cm;
        coef[2][1] = -2.0 * p2 / (sk * s2) * ck * c * c;
        coef[1][2] = 2.0 * p1 / (sk * s2) * c * cm;
        coef[2][2] = c * c / (sk * sk);
        let mut e = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        e += coef[i][j] * coef[k][l] * mu_a[i + k] * mu_b[j + l];
                    }
                }
            }
        }
        best = best.max(e);
    }
    Some(best)
}

/// `log Π_{j<N} sup_θ E|multiplier_j|⁴`, an upper bound on `log E[R_N⁴]`
/// for `R_1 = 1`.
pub fn log_fourth_moment_envelope(
    ctx: &EnergyContext,
    params: &ModelParams,
    spec: &DistributionSpec,
    n: usize,
) -> Option<f64> {
    let mut s = CompensatedSum::new();
    for j in 1..n {
        let v = step_fourth_moment_sup(ctx, spec, params.scale_at(j), params.scale_at(j + 1))?;
        s.add(v.ln());
    }
    Some(s.value())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R4Point {
    pub energy: f64,
    pub log_mean_half: f64,
    pub log_mean_full: f64,
    /// `E[R_N⁴] / E[R_{N/2}⁴]`.
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub log_envelope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R4Report {
    pub n: usize,
    pub replicas: usize,
    pub points: Vec<R4Point>,
    /// Trapezoid estimate of `∫ E[R_N⁴] dE` over the grid.
    pub integral: f64,
    pub sup_log_mean: f64,
    pub plateau: bool,
    pub growing: bool,
}

pub const R4_PLATEAU_TOL: f64 = 0.05;
const R4_BOOTSTRAP: usize = 200;

/// Monte Carlo `E[R_N⁴]` on an energy grid, compared with `E[R_{N/2}⁴]` on
/// the same replicas. `plateau` means every ratio is within
/// `R4_PLATEAU_TOL` of 1; `growing` means some ratio exceeds `1 + tol` with
/// its bootstrap interval.
pub fn r4_boundedness_probe(
    params: &ModelParams,
    spec: &DistributionSpec,
    energies: &[f64],
    n: usize,
    m: usize,
    seed: u64,
) -> Result<R4Report> {
    if n < 4 || m < 2 || energies.is_empty() {
        return Err(Error::InvalidParameter(
            "need n >= 4, m >= 2 and a nonempty energy grid".into(),
        ));
    }
    let ctxs: Vec<EnergyContext> = energies
        .iter()
        .map(|&e| {
            let c = energy_context(e, params.m)?;
            c.require_analytic()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let half = n / 2;
    let per_replica: Vec<Result<Vec<(f64, f64)>>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_replica(params, spec, n, seed, r);
            ctxs.iter()
                .map(|ctx| {
                    let mult = Multiplier::new(ctx);
                    let mut state = PruferState::from_angle(ctx, 0.0, System::First);
                    let mut at_half = 0.0;
                    for j in 1..n {
                        if j == half {
                            at_half = state.log_r;
                        }
                        let (re, im) =
                            mult.eval(state.phase, path.v1(j), path.v2(j + 1), System::First);
                        let modulus = re.hypot(im);
                        if modulus < DEGENERATE_GUARD {
                            return Err(Error::DegenerateMultiplier { site: j, modulus });
                        }
                        state.log_r += modulus.ln();
                        state.phase =
                            crate::model::wrap_angle(state.phase + im.atan2(re) - 2.0 * ctx.k);
                    }
                    Ok((4.0 * at_half, 4.0 * state.log_r))
                })
                .collect()
        })
        .collect();
    let mut table: Vec<Vec<(f64, f64)>> = Vec::with_capacity(m);
    for r in per_replica {
        table.push(r?);
    }
    let mut points = Vec::new();
    for (ei, ctx) in ctxs.iter().enumerate() {
        let lh: Vec<f64> = table.iter().map(|row| row[ei].0).collect();
        let lf: Vec<f64> = table.iter().map(|row| row[ei].1).collect();
        let log_mean_half = log_mean_exp(&lh);
        let log_mean_full = log_mean_exp(&lf);
        let ratio = (log_mean_full - log_mean_half).exp();
        let (ratio_lo, ratio_hi) =
            bootstrap_ci(m, R4_BOOTSTRAP, seed ^ 0x5a5a ^ ei as u64, 0.95, |idx| {
                let a: Vec<f64> = idx.iter().map(|&i| lh[i]).collect();
                let b: Vec<f64> = idx.iter().map(|&i| lf[i]).collect();
                (log_mean_exp(&b) - log_mean_exp(&a)).exp()
            });
        points.push(R4Point {
            energy: ctx.energy,
            log_mean_half,
            log_mean_full,
            ratio,
            ratio_lo,
            ratio_hi,
            log_envelope: log_fourth_moment_envelope(ctx, params, spec, n),
        });
    }
    let mut integral = 0.0;
    for w in points.windows(2) {
        integral += 0.5
            * (w[1].energy - w[0].energy)
            * (w[0].log_mean_full.exp() + w[1].log_mean_full.exp());
    }
    let sup_log_mean = points
        .iter()
        .map(|p| p.log_mean_full)
        .fold(f64::NEG_INFINITY, f64::max);
    let plateau = points
        .iter()
        .all(|p| (p.ratio - 1.0).abs() <= R4_PLATEAU_TOL);
    let growing = points.iter().any(|p| p.ratio_lo > 1.0 + R4_PLATEAU_TOL);
    Ok(R4Report {
        n,
        replicas: m,
        points,
        integral,
        sup_log_mean,
        plateau,
        growing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::DistributionFamily;

    #[test]
    fn closed_form_reference() {
        let ctx = energy_context(1.0, 0.0).unwrap();
        for lam in [0.0, 0.3, 1.0, 2.5] {
            assert!((beta_closed_form(&ctx, lam).unwrap() - lam * lam / 3.0).abs() < 1e-15);
        }
        let near = energy_context(1.0 + 1e-13, 1.0).unwrap();
        assert!(matches!(
            beta_closed_form(&near, 1.0),
            Err(Error::NearBandEdge { .. })
        ));
        let close = energy_context(1.0 + 1e-4, 1.0).unwrap();
        assert!(beta_closed_form(&close, 1.0).unwrap() > 1e3);
    }

    #[test]
    fn normalizer_matches_harmonic() {
        let n = 100_000;
        let mut h = 0.0f64;
        for j in (1..=n).rev() {
            h += 1.0 / j as f64;
        }
        assert!((decay_normalizer(Exponent::HALF, n) - h).abs() < 1e-9);
        let euler = 0.577_215_664_901_532_9;
        let asym = (n as f64).ln() + euler + 0.5 / n as f64 - 1.0 / (12.0 * (n as f64).powi(2));
        assert!((decay_normalizer(Exponent::HALF, n) - asym).abs() < 1e-12);
    }

    #[test]
    fn supercritical_refused() {
        let p = ModelParams::new(0.0, 1.0, Exponent::value(0.7).unwrap()).unwrap();
        let ctx = energy_context(1.0, 0.0).unwrap();
        assert!(matches!(
            estimate_beta(&ctx, &p, &DistributionSpec::default(), 10, 4, 1),
            Err(Error::SubcriticalOnly { .. })
        ));
    }

    #[test]
    fn free_estimate_is_small() {
        let p = ModelParams::new(0.0, 0.0, Exponent::HALF).unwrap();
        let ctx = energy_context(1.0, 0.0).unwrap();
        let est = estimate_beta(&ctx, &p, &DistributionSpec::default(), 5000, 4, 1).unwrap();
        assert!(est.beta_hat.abs() < 2.0 / est.s_n);
        assert_eq!(est.beta_hat_prufer, 0.0);
    }

    #[test]
    fn estimators_agree_and_scale() {
        let ctx = energy_context(1.0, 0.0).unwrap();
        let spec = DistributionSpec::default();
        let p1 = ModelParams::new(0.0, 0.4, Exponent::value(0.3).unwrap()).unwrap();
        let p2 = ModelParams::new(0.0, 0.8, Exponent::value(0.3).unwrap()).unwrap();
        let a = estimate_beta(&ctx, &p1, &spec, 20_000, 40, 9).unwrap();
        let b = estimate_beta(&ctx, &p2, &spec, 20_000, 40, 9).unwrap();
        assert!(
            a.estimator_gap_z().abs() < 2.0,
            "gap z {}",
            a.estimator_gap_z()
        );
        let ratio = b.beta_hat / a.beta_hat;
        let rel = ((a.stderr / a.beta_hat).powi(2) + (b.stderr / b.beta_hat).powi(2)).sqrt();
        assert!(
            (ratio - 4.0).abs() < 3.0 * rel * 4.0 + 0.25,
            "ratio {ratio}"
        );
    }

    #[test]
    fn reproducible() {
        let ctx = energy_context(1.3, 0.4).unwrap();
        let p = ModelParams::new(0.4, 0.5, Exponent::HALF).unwrap();
        let a = estimate_beta(&ctx, &p, &DistributionSpec::default(), 2000, 8, 5).unwrap();
        let b = estimate_beta(&ctx, &p, &DistributionSpec::default(), 2000, 8, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn r4_free_is_constant() {
        let p = ModelParams::new(0.0, 0.0, Exponent::value(1.0).unwrap()).unwrap();
        let r = r4_boundedness_probe(
            &p,
            &DistributionSpec::default(),
            &[0.8, 1.0, 1.2],
            200,
            4,
            1,
        )
        .unwrap();
        for pt in &r.points {
            assert_eq!(pt.log_mean_full, 0.0);
            assert_eq!(pt.ratio, 1.0);
        }
        assert!(r.plateau && !r.growing);
    }

    #[test]
    fn r4_envelope_dominates() {
        let p = ModelParams::new(0.0, 0.5, Exponent::value(1.0).unwrap()).unwrap();
        let spec = DistributionSpec::new(DistributionFamily::Uniform);
        let r = r4_boundedness_probe(&p, &spec, &[1.0], 400, 400, 3).unwrap();
        let pt = &r.points[0];
        assert!(pt.log_mean_full <= pt.log_envelope.unwrap() + 0.1);
        let student = DistributionSpec::new(DistributionFamily::StudentLike);
        let ctx = energy_context(1.0, 0.0).unwrap();
        assert!(log_fourth_moment_envelope(&ctx, &p, &student, 10).is_none());
    }

    #[test]
    fn step_moment_matches_sampling() {
        let ctx = energy_context(1.2, 0.3).unwrap();
        let spec = DistributionSpec::new(DistributionFamily::Rademacher);
        let (s1, s2) = (0.3, 0.2);
        let sup = step_fourth_moment_sup(&ctx, &spec, s1, s2).unwrap();
        let mult = Multiplier::new(&ctx);
        let mut best: f64 = 0.0;
        for g in 0..360 {
            let th = std::f64::consts::PI * g as f64 / 360.0;
            let mut e = 0.0;
            for a in [-1.0, 1.0] {
                for b in [-1.0, 1.0] {
                    let (re, im) = mult.eval(th, s1 * a, s2 * b, System::First);
                    e += 0.25 * (re * re + im * im).powi(2);
                }
            }
            best = best.max(e);
        }
        assert!((sup - best).abs() < 1e-3 * sup);
    }
}
