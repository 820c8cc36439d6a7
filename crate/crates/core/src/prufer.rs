//! Prüfer coordinates adapted to the free transfer matrix.
//!
//! With `Φ_n = P_n Ψ_n` and `ζ_n = R_n e^{iθ_n}` the complex form of
//! `Ψ_n`, each transfer step multiplies `ζ_n` by an explicit complex factor
//! depending on `θ̄_n = θ_n − (2n−1)k` and the local potential.

use crate::disorder::DisorderPath;
use crate::error::{Error, Result};
use crate::linalg::{norm2, CompensatedSum, Mat2};
use crate::model::{wrap_angle, EnergyContext};
use crate::transfer::{last_site_used, System};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisMatrix {
    pub matrix: Mat2,
    pub site: usize,
    pub system: System,
}

/// Change-of-basis matrix `P_n` (first system) or `P'_n` (second system).
pub fn basis_at(ctx: &EnergyContext, n: usize, system: System) -> Result<BasisMatrix> {
    ctx.require_analytic()?;
    if n == 0 {
        return Err(Error::SiteOutOfRange {
            site: 0,
            lo: 1,
            hi: usize::MAX,
        });
    }
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let a = (2 * n - 1) as f64 * ctx.k;
    let b = (2 * n - 2) as f64 * ctx.k;
    let sp2 = ctx.p2.sqrt();
    let sm1 = (-ctx.p1).sqrt();
    let matrix = match system {
        System::First => Mat2::new(-sp2 * a.cos(), -sp2 * a.sin(), sm1 * b.cos(), sm1 * b.sin()),
        System::Second => Mat2::new(sm1 * a.cos(), sm1 * a.sin(), sp2 * b.cos(), sp2 * b.sin()),
    };
    Ok(BasisMatrix {
        matrix: matrix.scale(sign),
        site: n,
        system,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruferState {
    pub log_r: f64,
    pub theta: f64,
    pub n: usize,
    pub system: System,
    /// `θ̄_n` reduced to `(−π, π]`, advanced incrementally.
    pub phase: f64,
}

impl PruferState {
    /// `Ψ_1 = (cos θ_0, sin θ_0)`.
    pub fn from_angle(ctx: &EnergyContext, theta0: f64, system: System) -> Self {
        PruferState {
            log_r: 0.0,
            theta: theta0,
            n: 1,
            system,
            phase: wrap_angle(theta0 - ctx.k),
        }
    }

    /// Prüfer coordinates of the solution with `Φ_1 = phi1` (first system)
    /// or `Φ'_1 = phi1` (second system).
    pub fn from_vector(ctx: &EnergyContext, phi1: [f64; 2], system: System) -> Result<Self> {
        let p = basis_at(ctx, 1, system)?.matrix;
        let psi = p
            .inverse()
            .ok_or(Error::NearBandEdge {
                energy: ctx.energy,
                sin2k: ctx.sin_2k,
            })?
            .apply(phi1);
        let r = norm2(psi);
        if r == 0.0 {
            return Err(Error::InvalidParameter(
                "initial vector must be nonzero".into(),
            ));
        }
        let theta = psi[1].atan2(psi[0]);
        Ok(PruferState {
            log_r: r.ln(),
            theta,
            n: 1,
            system,
            phase: wrap_angle(theta - ctx.k),
        })
    }

    /// Unwrapped `θ̄_n = θ_n − (2n−1)k`.
    pub fn theta_bar(&self, ctx: &EnergyContext) -> f64 {
        self.theta - (2 * self.n - 1) as f64 * ctx.k
    }

    #[inline]
    fn advance(&self, ctx: &EnergyContext, re: f64, im: f64) -> PruferState {
        let modulus = re.hypot(im);
        let dtheta = im.atan2(re);
        PruferState {
            log_r: self.log_r + modulus.ln(),
            theta: self.theta + dtheta,
            n: self.n + 1,
            system: self.system,
            phase: wrap_angle(self.phase + dtheta - 2.0 * ctx.k),
        }
    }

    pub fn zeta(&self) -> Complex64 {
        Complex64::from_polar(self.log_r.exp(), self.theta)
    }

    /// `Ψ_n / R_n`.
    pub fn direction(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }
}

/// Precomputed coefficients of the Prüfer multiplier.
#[derive(Debug, Clone, Copy)]
pub struct Multiplier {
    a: f64,
    b: f64,
    c: f64,
    cos_k: f64,
    sin_k: f64,
}

pub const DEGENERATE_GUARD: f64 = 1e-14;

impl Multiplier {
    pub fn new(ctx: &EnergyContext) -> Self {
        Multiplier {
            a: ctx.p2 / ctx.sin_2k,
            b: ctx.p1 / ctx.sin_2k,
            c: 1.0 / ctx.sin_k,
            cos_k: ctx.cos_k,
            sin_k: ctx.sin_k,
        }
    }

    /// Multiplier for phase `theta_bar` and local potentials `v1`, `v2`
    /// (`V_2(n+1)` for the first system, `V_2(n)` for the second).
    #[inline]
    pub fn eval(&self, theta_bar: f64, v1: f64, v2: f64, system: System) -> (f64, f64) {
        let (s, c) = theta_bar.sin_cos();
        let ck = c * self.cos_k + s * self.sin_k;
        let sk = s * self.cos_k - c * self.sin_k;
        let v12 = v1 * v2;
        match system {
            System::First => (
                1.0 - self.a * v1 * c * s + self.b * v2 * ck * sk + self.c * v12 * c * sk,
                -self.a * v1 * c * c + self.b * v2 * ck * ck + self.c * v12 * c * ck,
            ),
            System::Second => (
                1.0 - self.a * v1 * ck * sk + self.b * v2 * c * s + self.c * v12 * c * sk,
                -self.a * v1 * ck * ck + self.b * v2 * c * c + self.c * v12 * c * ck,
            ),
        }
    }

    pub fn eval_complex(&self, theta_bar: f64, v1: f64, v2: f64, system: System) -> Complex64 {
        let (re, im) = self.eval(theta_bar, v1, v2, system);
        Complex64::new(re, im)
    }
}

#[inline]
fn local_potentials(path: &DisorderPath, n: usize, system: System) -> (f64, f64) {
    match system {
        System::First => (path.v1(n), path.v2(n + 1)),
        System::Second => (path.v1(n), path.v2(n)),
    }
}

/// Advances the state from site `n` to `n + 1`.
pub fn prufer_step(
    state: &PruferState,
    ctx: &EnergyContext,
    path: &DisorderPath,
) -> Result<PruferState> {
    ctx.require_analytic()?;
    let mult = Multiplier::new(ctx);
    step_with(state, ctx, &mult, path)
}

#[inline]
fn step_with(
    state: &PruferState,
    ctx: &EnergyContext,
    mult: &Multiplier,
    path: &DisorderPath,
) -> Result<PruferState> {
    let n = state.n;
    path.require(last_site_used(n, state.system))?;
    let (v1, v2) = local_potentials(path, n, state.system);
    let (re, im) = mult.eval(state.phase, v1, v2, state.system);
    let modulus = re.hypot(im);
    if modulus < DEGENERATE_GUARD || !modulus.is_finite() {
        return Err(Error::DegenerateMultiplier { site: n, modulus });
    }
    Ok(state.advance(ctx, re, im))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub n: usize,
    pub log_r: f64,
    pub theta: f64,
    /// `θ̄_n` reduced to `(−π, π]`.
    pub theta_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recording {
    /// Every site.
    Full,
    /// Sites `1, 1 + stride, …` and the last one.
    Every(usize),
    /// Final state only.
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruferRun {
    pub last: PruferState,
    pub rows: Vec<TrajectoryRow>,
}

/// Runs the recursion from `Ψ_1 = e^{iθ_0}` up to site `n_max`.
pub fn run_prufer(
    ctx: &EnergyContext,
    path: &DisorderPath,
    n_max: usize,
    theta0: f64,
    system: System,
    recording: Recording,
) -> Result<PruferRun> {
    run_from(
        ctx,
        path,
        n_max,
        PruferState::from_angle(ctx, theta0, system),
        recording,
    )
}

pub fn run_from(
    ctx: &EnergyContext,
    path: &DisorderPath,
    n_max: usize,
    start: PruferState,
    recording: Recording,
) -> Result<PruferRun> {
    ctx.require_analytic()?;
    if n_max < start.n {
        return Err(Error::SiteOutOfRange {
            site: n_max,
            lo: start.n,
            hi: usize::MAX,
        });
    }
    if n_max > start.n {
        path.require(last_site_used(n_max - 1, start.system))?;
    }
    let mult = Multiplier::new(ctx);
    let mut rows = Vec::new();
    let row = |s: &PruferState| TrajectoryRow {
        n: s.n,
        log_r: s.log_r,
        theta: s.theta,
        theta_bar: s.phase,
    };
    let keep = |n: usize| match recording {
        Recording::Full => true,
        Recording::Every(k) => (n - 1).is_multiple_of(k.max(1)) || n == n_max,
        Recording::FinalOnly => n == n_max,
    };
    let mut s = start;
    if keep(s.n) {
        rows.push(row(&s));
    }
    while s.n < n_max {
        s = step_with(&s, ctx, &mult, path)?;
        if keep(s.n) {
            rows.push(row(&s));
        }
    }
    Ok(PruferRun { last: s, rows })
}

/// Constants `(c_lo, c_hi)` with `c_lo R_n² ≤ ‖Φ_n‖² ≤ c_hi R_n²`, namely
/// `sin²2k/(2E)` and `2E = tr(P_nᵀP_n)`.
pub fn sandwich_constants(ctx: &EnergyContext) -> (f64, f64) {
    (
        ctx.sin_2k * ctx.sin_2k / (2.0 * ctx.energy),
        2.0 * ctx.energy,
    )
}

/// Individual terms of `Γ = |multiplier|² − 1` for the first system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadiusTerms {
    pub v1_sq: f64,
    pub v2_sq: f64,
    pub v1v2_sq: f64,
    pub v1: f64,
    pub v2: f64,
    pub v1v2_sin: f64,
    pub v1v2_cos: f64,
    pub v1_sq_v2: f64,
    pub v1_v2_sq: f64,
}

impl RadiusTerms {
    pub fn total(&self) -> f64 {
        self.v1_sq
            + self.v2_sq
            + self.v1v2_sq
            + self.v1
            + self.v2
            + self.v1v2_sin
            + self.v1v2_cos
            + self.v1_sq_v2
            + self.v1_v2_sq
    }

    pub fn first_order(&self) -> f64 {
        self.v1 + self.v2
    }
}

/// Expansion of `R²_{n+1}/R²_n − 1` in powers of `V_1(n)` and `V_2(n+1)`.
pub fn radius_terms(ctx: &EnergyContext, theta_bar: f64, v1: f64, v2: f64) -> RadiusTerms {
    let s2 = ctx.sin_2k;
    let (sk, ck) = (ctx.sin_k, ctx.cos_k);
    let (p1, p2) = (ctx.p1, ctx.p2);
    let c = theta_bar.cos();
    let cm = (theta_bar - ctx.k).cos();
    let sm = (theta_bar - ctx.k).sin();
    RadiusTerms {
        v1_sq: p2 * p2 / (s2 * s2) * c * c * v1 * v1,
        v2_sq: p1 * p1 / (s2 * s2) * cm * cm * v2 * v2,
        v1v2_sq: c * c / (sk * sk) * v1 * v1 * v2 * v2,
        v1: -p2 / s2 * (2.0 * theta_bar).sin() * v1,
        v2: p1 / s2 * (2.0 * (theta_bar - ctx.k)).sin() * v2,
        v1v2_sin: 2.0 / sk * c * sm * v1 * v2,
        v1v2_cos: -2.0 * p1 * p2 / (s2 * s2) * ck * c * cm * v1 * v2,
        v1_sq_v2: -2.0 * p2 / (sk * s2) * ck * c * c * v1 * v1 * v2,
        v1_v2_sq: 2.0 * p1 / (sk * s2) * c * cm * v1 * v2 * v2,
    }
}

pub const EXCLUDED_K: [f64; 3] = [-5.0 * PI / 8.0, -3.0 * PI / 4.0, -7.0 * PI / 8.0];
pub const EXCLUDED_K_GUARD: f64 = 1e-3;

pub fn check_excluded_k(ctx: &EnergyContext) -> Result<()> {
    for &e in EXCLUDED_K.iter() {
        if (ctx.k - e).abs() < EXCLUDED_K_GUARD {
            return Err(Error::ExcludedK {
                k: ctx.k,
                excluded: e,
                guard: EXCLUDED_K_GUARD,
            });
        }
    }
    Ok(())
}

/// Splitting of `log R_N²` into drift, martingales, phase sums and a
/// higher-order remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub n: usize,
    pub s_n: f64,
    pub log_r2: f64,
    pub drift: f64,
    pub martingales: [f64; 6],
    pub phase_sums: [f64; 2],
    pub remainder: f64,
    pub residual: f64,
    /// `Σ_j |Γ(j)|³`.
    pub cubic_sum: f64,
}

impl MartingaleReport {
    pub fn parts_sum(&self) -> f64 {
        self.drift
            + self.martingales.iter().sum::<f64>()
            + self.phase_sums.iter().sum::<f64>()
            + self.remainder
    }
}

/// Term-wise decomposition of `log R_N²` along the first system, starting
/// from `Ψ_1 = e^{iθ_0}`.
pub fn martingale_diagnostics(
    ctx: &EnergyContext,
    path: &DisorderPath,
    n_max: usize,
    theta0: f64,
) -> Result<MartingaleReport> {
    ctx.require_analytic()?;
    check_excluded_k(ctx)?;
    if n_max < 2 {
        return Err(Error::InvalidParameter("need at least two sites".into()));
    }
    path.require(n_max)?;
    let params = &path.params;
    let mult = Multiplier::new(ctx);
    let s2 = ctx.sin_2k;
    let (p1, p2) = (ctx.p1, ctx.p2);
    let g1 = p2 * p2 / (s2 * s2);
    let g2 = p1 * p1 / (s2 * s2);
    let cross = p1 * p2 / (s2 * s2);

    let mut log_r2 = CompensatedSum::new();
    let mut drift = CompensatedSum::new();
    let mut mart: [CompensatedSum; 6] = Default::default();
    let mut phase: [CompensatedSum; 2] = Default::default();
    let mut rem = CompensatedSum::new();
    let mut cubic = CompensatedSum::new();
    let mut s_n = CompensatedSum::new();
    let alpha = params.alpha.as_f64();

    let mut state = PruferState::from_angle(ctx, theta0, System::First);
    for j in 1..n_max {
        let tb = state.phase;
        let v1 = path.v1(j);
        let v2 = path.v2(j + 1);
        let ev1 = params.scale_at(j).powi(2);
        let ev2 = params.scale_at(j + 1).powi(2);
        let t = radius_terms(ctx, tb, v1, v2);
        let (re, im) = mult.eval(tb, v1, v2, System::First);
        let gamma = re * re + im * im - 1.0;
        let step_log = gamma.ln_1p();

        let c2 = (2.0 * tb).cos();
        let c4 = (4.0 * tb).cos();
        let tk = tb - ctx.k;
        let c2k = (2.0 * tk).cos();
        let c4k = (4.0 * tk).cos();
        let w1 = 0.25 + 0.5 * c2 + 0.25 * c4;
        let w2 = 0.25 + 0.5 * c2k + 0.25 * c4k;

        drift.add(0.25 * g1 * ev1 + 0.25 * g2 * ev2);
        mart[0].add(g1 * w1 * (v1 * v1 - ev1));
        mart[1].add(g2 * w2 * (v2 * v2 - ev2));
        mart[2].add(t.v1);
        mart[3].add(t.v2);
        mart[4].add(t.v1v2_sin);
        mart[5].add(t.v1v2_cos + cross * (2.0 * tb).sin() * (2.0 * tk).sin() * v1 * v2);
        phase[0].add(g1 * (0.5 * c2 + 0.25 * c4) * ev1);
        phase[1].add(g2 * (0.5 * c2k + 0.25 * c4k) * ev2);

        let lin = t.first_order();
        let quad = t.v1_sq + t.v2_sq + t.v1v2_sin + t.v1v2_cos - 0.5 * lin * lin;
        rem.add(step_log - lin - quad);
        cubic.add(gamma.abs().powi(3));
        log_r2.add(step_log);
        s_n.add((j as f64).powf(-2.0 * alpha));

        let modulus = (re * re + im * im).sqrt();
        if modulus < DEGENERATE_GUARD {
            return Err(Error::DegenerateMultiplier { site: j, modulus });
        }
        state = state.advance(ctx, re, im);
    }
    s_n.add((n_max as f64).powf(-2.0 * alpha));
    let mut report = MartingaleReport {
        n: n_max,
        s_n: s_n.value(),
        log_r2: log_r2.value(),
        drift: drift.value(),
        martingales: [0.0; 6],
        phase_sums: [phase[0].value(), phase[1].value()],
        remainder: rem.value(),
        residual: 0.0,
        cubic_sum: cubic.value(),
    };
    for (i, m) in mart.iter().enumerate() {
        report.martingales[i] = m.value();
    }
    report.residual = report.log_r2 - report.parts_sum();
    Ok(report)
}
