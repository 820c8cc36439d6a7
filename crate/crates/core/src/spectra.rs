//! Eigenfunction profiles, eigenfunction correlators and the Prüfer radius
//! ratio diagnostic.

use crate::disorder::{sample_path, sample_replica, DisorderPath, DistributionSpec};
use crate::eigen::{diagonalize_window, SpectralDecomposition, DEFAULT_DIMENSION_CAP};
use crate::error::{Error, Result};
use crate::greens::{fit_decay, DecayFit, ScanPoint};
use crate::lyapunov::beta_value;
use crate::model::{assemble_operator, BoxDescriptor, EnergyContext, ModelParams, Spin};
use crate::prufer::{check_excluded_k, run_from, PruferState, Recording};
use crate::stats::{median, ols};
use crate::transfer::System;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Eigenvalues closer than this share one spectral projection.
pub const DEGENERACY_GAP: f64 = 1e-10;
/// Profile points more than this many e-folds below the peak are treated as
/// rounding noise and left out of fits.
pub const PROFILE_FLOOR: f64 = 33.0;

/// `‖Φ_n‖ = (|φ⁺_n|² + |φ⁻_n|²)^{1/2}` for `n = 1..=l` (index `n − 1`).
pub fn site_norms(v: &[f64], boxd: BoxDescriptor) -> Vec<f64> {
    (1..=boxd.l)
        .map(|n| {
            let p = boxd.index_of(n, Spin::Plus).map_or(0.0, |i| v[i]);
            let q = boxd.index_of(n, Spin::Minus).map_or(0.0, |i| v[i]);
            p.hypot(q)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenProfile {
    pub energy: f64,
    /// Site of the largest `‖Φ_n‖`.
    pub center: usize,
    pub beta: f64,
    /// Slope of `log‖Φ_n‖` against `|s_n − s_center|`.
    pub slope: f64,
    pub r2: f64,
    /// `slope / β`.
    pub ratio: f64,
    /// Slope against `|n^{1−2α} − center^{1−2α}|`, for `α < ½`.
    pub stretched_slope: Option<f64>,
    /// Power-law decay exponent right of the centre, `−d log‖Φ_n‖ / d log n`.
    pub kappa: f64,
    /// `min_{n ≥ center} ‖Φ_n‖ n^κ`.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub l: usize,
    pub window: (f64, f64),
    pub profiles: Vec<EigenProfile>,
    /// Median of `slope/β`.
    pub median_ratio: f64,
    /// Median of `|slope/β + 1|`.
    pub median_deviation: f64,
}

fn summarize(l: usize, window: (f64, f64), profiles: Vec<EigenProfile>) -> ProfileReport {
    let ratios: Vec<f64> = profiles.iter().map(|p| p.ratio).collect();
    let dev: Vec<f64> = ratios.iter().map(|r| (r + 1.0).abs()).collect();
    ProfileReport {
        l,
        window,
        median_ratio: median(&ratios),
        median_deviation: median(&dev),
        profiles,
    }
}

/// Rows `(n, log‖Φ_n‖, s_n)` of one eigenvector.
pub fn profile_rows(v: &[f64], boxd: BoxDescriptor, alpha: f64) -> Vec<(usize, f64, f64)> {
    let norms = site_norms(v, boxd);
    let mut s = 0.0;
    norms
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let n = i + 1;
            s += (n as f64).powf(-2.0 * alpha);
            (n, x.ln(), s)
        })
        .collect()
}

fn fit_profile(
    v: &[f64],
    boxd: BoxDescriptor,
    energy: f64,
    params: &ModelParams,
) -> Option<EigenProfile> {
    let alpha = params.alpha.as_f64();
    let ctx = EnergyContext::new(energy, params.m).ok()?;
    if ctx.near_edge {
        return None;
    }
    let rows = profile_rows(v, boxd, alpha);
    let (ci, peak) = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.1))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let sc = rows[ci].2;
    let kept: Vec<&(usize, f64, f64)> = rows
        .iter()
        .filter(|r| r.1.is_finite() && r.1 > peak - PROFILE_FLOOR)
        .collect();
    let xs: Vec<f64> = kept.iter().map(|r| (r.2 - sc).abs()).collect();
    let ys: Vec<f64> = kept.iter().map(|r| r.1).collect();
    let fit = ols(&xs, &ys);
    let beta = beta_value(&ctx, params.lambda);
    let stretched_slope = (alpha < 0.5).then(|| {
        let e = 1.0 - 2.0 * alpha;
        let c = ((ci + 1) as f64).powf(e);
        let x: Vec<f64> = kept
            .iter()
            .map(|r| ((r.0 as f64).powf(e) - c).abs())
            .collect();
        ols(&x, &ys).slope
    });
    let right: Vec<&&(usize, f64, f64)> = kept.iter().filter(|r| r.0 > ci + 1).collect();
    let kappa = if right.len() >= 2 {
        let x: Vec<f64> = right.iter().map(|r| (r.0 as f64).ln()).collect();
        let y: Vec<f64> = right.iter().map(|r| r.1).collect();
        -ols(&x, &y).slope
    } else {
        0.0
    };
    let lower_bound = rows[ci..]
        .iter()
        .map(|r| (r.1 + kappa * (r.0 as f64).ln()).exp())
        .fold(f64::INFINITY, f64::min);
    Some(EigenProfile {
        energy,
        center: ci + 1,
        beta,
        slope: fit.slope,
        r2: fit.r2,
        ratio: fit.slope / beta,
        stretched_slope,
        kappa,
        lower_bound,
    })
}

/// Profiles of every eigenpair of `Λ'_L` with eigenvalue in `[lo, hi]`.
pub fn profiles_for_path(
    params: &ModelParams,
    path: &DisorderPath,
    lo: f64,
    hi: f64,
    l: usize,
) -> Result<ProfileReport> {
    let op = assemble_operator(params, path, BoxDescriptor::lambda_prime(l))?;
    let d = diagonalize_window(&op, lo, hi, DEFAULT_DIMENSION_CAP)?;
    if d.is_empty() {
        return Err(Error::WindowEmpty { lo, hi });
    }
    let profiles: Vec<EigenProfile> = d
        .eigenvalues
        .iter()
        .zip(&d.eigenvectors)
        .filter_map(|(&e, v)| fit_profile(v, d.boxd, e, params))
        .collect();
    if profiles.is_empty() {
        return Err(Error::WindowEmpty { lo, hi });
    }
    Ok(summarize(l, (lo, hi), profiles))
}

/// Eigenfunction decay fits pooled over `seeds`.
pub fn eigenfunction_profile(
    params: &ModelParams,
    spec: &DistributionSpec,
    window: (f64, f64),
    l: usize,
    seeds: &[u64],
) -> Result<ProfileReport> {
    let (lo, hi) = window;
    if lo >= hi {
        return Err(Error::WindowEmpty { lo, hi });
    }
    let reports: Vec<Result<ProfileReport>> = seeds
        .par_iter()
        .map(|&s| profiles_for_path(params, &sample_path(params, spec, l, s), lo, hi, l))
        .collect();
    let mut profiles = Vec::new();
    for r in reports {
        match r {
            Ok(r) => profiles.extend(r.profiles),
            Err(Error::WindowEmpty { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if profiles.is_empty() {
        return Err(Error::WindowEmpty { lo, hi });
    }
    Ok(summarize(l, window, profiles))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEntry {
    pub n: usize,
    pub sigma_p: Spin,
    /// `Σ_E |⟨δ_u, P_E δ_n⟩|`.
    pub q: f64,
    /// `Σ_E |⟨δ_u, P_E δ_u⟩|^{1−s} |⟨δ_u, P_E δ_n⟩|^s`.
    pub q_s: f64,
    /// Same with the roles of `(u, σ)` and `(n, σ')` exchanged.
    pub q_s_rev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorTable {
    pub u: usize,
    pub sigma: Spin,
    pub window: (f64, f64),
    pub s: f64,
    pub blocks: usize,
    pub entries: Vec<CorrelatorEntry>,
}

impl CorrelatorTable {
    pub fn get(&self, n: usize, sigma_p: Spin) -> Option<&CorrelatorEntry> {
        self.entries
            .iter()
            .find(|e| e.n == n && e.sigma_p == sigma_p)
    }
}

/// Ranges of eigenvalue indices merged into one projection.
pub fn projection_blocks(values: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for j in 1..=values.len() {
        if j == values.len() || values[j] - values[j - 1] >= DEGENERACY_GAP {
            if j > start {
                out.push(start..j);
            }
            start = j;
        }
    }
    out
}

/// Eigenfunction correlators from `(u, σ)` to every site of the box, over
/// the eigenvalues in `window`.
pub fn correlator(
    decomp: &SpectralDecomposition,
    u: usize,
    sigma: Spin,
    window: (f64, f64),
    s: f64,
) -> Result<CorrelatorTable> {
    let boxd = decomp.boxd;
    let iu = boxd.index_of(u, sigma).ok_or(Error::SiteOutOfRange {
        site: u,
        lo: 1,
        hi: boxd.l,
    })?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!(
            "s must lie in [0, 1], got {s}"
        )));
    }
    let dim = decomp.dim();
    let mut q = vec![0.0; dim];
    let mut q_s = vec![0.0; dim];
    let mut q_s_rev = vec![0.0; dim];
    let mut blocks = 0;
    for b in projection_blocks(&decomp.eigenvalues) {
        let e = decomp.eigenvalues[b.start];
        if e < window.0 || e > window.1 {
            continue;
        }
        blocks += 1;
        // Row u of the projection and its diagonal.
        let mut row = vec![0.0; dim];
        let mut diag = vec![0.0; dim];
        for j in b {
            let v = &decomp.eigenvectors[j];
            let vu = v[iu];
            for i in 0..dim {
                row[i] += vu * v[i];
                diag[i] += v[i] * v[i];
            }
        }
        let puu = diag[iu];
        for i in 0..dim {
            let c = row[i].abs();
            q[i] += c;
            q_s[i] += puu.powf(1.0 - s) * c.powf(s);
            q_s_rev[i] += diag[i].powf(1.0 - s) * c.powf(s);
        }
    }
    let entries = (0..dim)
        .map(|i| {
            let (n, sigma_p) = boxd.site_of(i).expect("index inside box");
            CorrelatorEntry {
                n,
                sigma_p,
                q: q[i],
                q_s: q_s[i],
                q_s_rev: q_s_rev[i],
            }
        })
        .collect();
    Ok(CorrelatorTable {
        u,
        sigma,
        window,
        s,
        blocks,
        entries,
    })
}

/// `Σ_{n,σ'} Σ_E |⟨δ_u, P_E δ_n⟩|²` over all projections present.
pub fn parseval_sum(decomp: &SpectralDecomposition, u: usize, sigma: Spin) -> Result<f64> {
    let iu = decomp
        .boxd
        .index_of(u, sigma)
        .ok_or(Error::SiteOutOfRange {
            site: u,
            lo: 1,
            hi: decomp.boxd.l,
        })?;
    let dim = decomp.dim();
    let mut total = 0.0;
    for b in projection_blocks(&decomp.eigenvalues) {
        let mut row = vec![0.0; dim];
        for j in b {
            let v = &decomp.eigenvectors[j];
            for i in 0..dim {
                row[i] += v[iu] * v[i];
            }
        }
        total += row.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorScan {
    pub l: usize,
    pub window: (f64, f64),
    pub replicas: usize,
    pub points: Vec<ScanPoint>,
    pub fit: DecayFit,
}

/// Mean `Q_L(1, −; n, −; I)` over replicas on `Λ_L`, fitted against
/// `n^{1−2α}`.
pub fn correlator_scan(
    params: &ModelParams,
    spec: &DistributionSpec,
    window: (f64, f64),
    grid: &[usize],
    l: usize,
    m: usize,
    seed: u64,
) -> Result<CorrelatorScan> {
    if grid.len() < 3 || grid.iter().any(|&n| n == 0 || n > l) {
        return Err(Error::InvalidParameter(
            "grid needs >= 3 sites inside the box".into(),
        ));
    }
    let boxd = BoxDescriptor::lambda(l);
    let rows: Vec<Result<Vec<f64>>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_replica(params, spec, l, seed, r);
            let op = assemble_operator(params, &path, boxd)?;
            let d = diagonalize_window(&op, window.0, window.1, DEFAULT_DIMENSION_CAP)?;
            let t = correlator(&d, 1, Spin::Minus, window, 1.0)?;
            Ok(grid
                .iter()
                .map(|&n| t.get(n, Spin::Minus).map_or(0.0, |e| e.q))
                .collect())
        })
        .collect();
    let samples = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let (points, fit) = fit_decay(grid, &samples, params.alpha.as_f64(), seed ^ 0xc0de);
    Ok(CorrelatorScan {
        l,
        window,
        replicas: m,
        points,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnReport {
    pub n: usize,
    /// `(n, log r_n)` every `stride` sites.
    pub log_r: Vec<(usize, f64)>,
    pub stride: usize,
    /// `max_n |R¹R² sin 2k sin(θ¹ − θ²) − 1|`.
    pub wronskian_residual: f64,
    /// `(N_w, max − min of log r_n on [N_w/2, N_w])` for `N_w = N/4, N/2, N`.
    pub tail_oscillation: Vec<(usize, f64)>,
}

/// Prüfer trajectories from `(1,0)` and `(0,1)` and the ratio of their radii.
pub fn rn_ratio_diagnostic(ctx: &EnergyContext, path: &DisorderPath, n: usize) -> Result<RnReport> {
    check_excluded_k(ctx)?;
    if n < 8 {
        return Err(Error::InvalidParameter("need at least 8 sites".into()));
    }
    let a = run_from(
        ctx,
        path,
        n,
        PruferState::from_vector(ctx, [1.0, 0.0], System::First)?,
        Recording::Full,
    )?;
    let b = run_from(
        ctx,
        path,
        n,
        PruferState::from_vector(ctx, [0.0, 1.0], System::First)?,
        Recording::Full,
    )?;
    let mut wr: f64 = 0.0;
    let mut lr = Vec::with_capacity(a.rows.len());
    for (x, y) in a.rows.iter().zip(&b.rows) {
        let w = (x.log_r + y.log_r).exp() * ctx.sin_2k * (x.theta_bar - y.theta_bar).sin();
        wr = wr.max((w.abs() - 1.0).abs());
        lr.push((x.n, x.log_r - y.log_r));
    }
    let osc = |end: usize| {
        let vals: Vec<f64> = lr
            .iter()
            .filter(|(k, _)| *k >= end / 2 && *k <= end)
            .map(|p| p.1)
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        (end, hi - lo)
    };
    let tail_oscillation = vec![osc(n / 4), osc(n / 2), osc(n)];
    let stride = (n / 2000).max(1);
    let log_r = lr
        .into_iter()
        .filter(|(k, _)| k % stride == 0 || *k == n)
        .collect();
    Ok(RnReport {
        n,
        log_r,
        stride,
        wronskian_residual: wr,
        tail_oscillation,
    })
}
