//! Finite-volume Green's functions, resolvent identities and fractional
//! moment scans.

use crate::disorder::{sample_replica, DisorderPath, DistributionSpec};
use crate::error::{Error, Result};
use crate::linalg::TridiagonalLdl;
use crate::model::{assemble_operator, BoxDescriptor, ModelParams, Spin, TridiagonalOperator};
use crate::stats::{bootstrap_ci, mean_se, wls, LinearFit};
use crate::transfer::{product_raw, transfer_from_potential, System, VectorWalker};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenQuery {
    pub boxd: BoxDescriptor,
    pub u: usize,
    pub sigma: Spin,
    pub n: usize,
    pub sigma_p: Spin,
    pub energy: f64,
}

/// Factorization of `D_box − E` shared by many Green's function entries.
#[derive(Debug, Clone)]
pub struct GreenSolver {
    ldl: TridiagonalLdl,
    boxd: BoxDescriptor,
    pub energy: f64,
}

impl GreenSolver {
    pub fn new(op: &TridiagonalOperator, energy: f64) -> Result<Self> {
        Ok(GreenSolver {
            ldl: TridiagonalLdl::factor(&op.diag, &op.off, energy)?,
            boxd: op.boxd,
            energy,
        })
    }

    fn index(&self, n: usize, s: Spin) -> Result<usize> {
        self.boxd.index_of(n, s).ok_or(Error::SiteOutOfRange {
            site: n,
            lo: 1,
            hi: self.boxd.l,
        })
    }

    /// Column `G(·; n, σ')` indexed like the box.
    pub fn column(&self, n: usize, sigma_p: Spin) -> Result<Vec<f64>> {
        Ok(self.ldl.column(self.index(n, sigma_p)?))
    }

    pub fn entry(&self, u: usize, sigma: Spin, n: usize, sigma_p: Spin) -> Result<f64> {
        let i = self.index(u, sigma)?;
        Ok(self.column(n, sigma_p)?[i])
    }

    pub fn boxd(&self) -> BoxDescriptor {
        self.boxd
    }
}

/// `G(u, σ; n, σ'; E) = ⟨δ^σ_u, (D_box − E)^{-1} δ^{σ'}_n⟩`.
pub fn green(query: &GreenQuery, path: &DisorderPath) -> Result<f64> {
    let op = assemble_operator(&path.params, path, query.boxd)?;
    GreenSolver::new(&op, query.energy)?.entry(query.u, query.sigma, query.n, query.sigma_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    /// Small box against `−φ^±_u / φ⁺_n`.
    pub small_box: f64,
    /// Primed small box against `φ^±_u / φ⁻_{n+1}`.
    pub small_box_prime: f64,
    /// `G_L = (1 − G_L(n,+;n,−)) G_n`.
    pub big_to_small: f64,
    /// `G'_L = (1 + G'_L(n+1,−;n,+)) G'_n`.
    pub big_to_small_prime: f64,
    /// Largest `|G_L(u,±;n,−)|` divided by the pathwise bound
    /// `(1+|G_L(n,+;n,−)|)(1+|G_n(n,−;n,−)|)|φ^±_u| / max(|φ⁺_n|, |φ⁻_n|)`.
    pub reduction_ratio: f64,
}

impl ResolventReport {
    pub fn max_residual(&self) -> f64 {
        self.small_box
            .max(self.small_box_prime)
            .max(self.big_to_small)
            .max(self.big_to_small_prime)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        d / s
    }
}

/// Checks the identities linking small- and big-box resolvents to the
/// generalized eigenfunction `Φ_u = T_{[1,u]}(φ⁺_1, φ⁻_1)` at energy `E`.
pub fn verify_resolvent_identities(
    path: &DisorderPath,
    energy: f64,
    n: usize,
    l: usize,
) -> Result<ResolventReport> {
    if n < 2 || l <= n {
        return Err(Error::InvalidParameter(format!(
            "need 2 <= n < L (got n={n}, L={l})"
        )));
    }
    path.require(l)?;
    let params = &path.params;
    let m = params.m;
    // φ_u = (φ⁺_u, φ⁻_u) for u = 1..=n+1 via first-system transfer matrices.
    let phi1 = [m + energy - path.v2(1), 1.0];
    let mut phi = vec![[0.0; 2]; n + 2];
    phi[1] = phi1;
    for u in 2..=n + 1 {
        let t = transfer_from_potential(energy, m, path.v1(u - 1), path.v2(u), System::First);
        phi[u] = t.apply(phi[u - 1]);
    }
    let comp = |u: usize, s: Spin| match s {
        Spin::Plus => phi[u][0],
        Spin::Minus => phi[u][1],
    };
    let small = GreenSolver::new(
        &assemble_operator(params, path, BoxDescriptor::lambda(n))?,
        energy,
    )?;
    let small_p = GreenSolver::new(
        &assemble_operator(params, path, BoxDescriptor::lambda_prime(n))?,
        energy,
    )?;
    let big = GreenSolver::new(
        &assemble_operator(params, path, BoxDescriptor::lambda(l))?,
        energy,
    )?;
    let big_p = GreenSolver::new(
        &assemble_operator(params, path, BoxDescriptor::lambda_prime(l))?,
        energy,
    )?;

    let col_small = small.column(n, Spin::Minus)?;
    let col_small_p = small_p.column(n, Spin::Plus)?;
    let col_big = big.column(n, Spin::Minus)?;
    let col_big_p = big_p.column(n, Spin::Plus)?;
    let at =
        |s: &GreenSolver, col: &[f64], u: usize, sp: Spin| s.boxd().index_of(u, sp).map(|i| col[i]);

    let g_big_np = at(&big, &col_big, n, Spin::Plus).expect("(n,+) lies in the big box");
    let g_big_p_n1m =
        at(&big_p, &col_big_p, n + 1, Spin::Minus).expect("(n+1,-) lies in the big box");
    let g_small_nn = at(&small, &col_small, n, Spin::Minus).expect("(n,-) lies in the small box");
    let phi_n_max = phi[n][0].abs().max(phi[n][1].abs());
    let mut report = ResolventReport {
        small_box: 0.0,
        small_box_prime: 0.0,
        big_to_small: 0.0,
        big_to_small_prime: 0.0,
        reduction_ratio: 0.0,
    };
    for u in 1..=n {
        for sp in [Spin::Plus, Spin::Minus] {
            if let Some(g) = at(&small, &col_small, u, sp) {
                report.small_box = report.small_box.max(rel(g, -comp(u, sp) / phi[n][0]));
                let gb = at(&big, &col_big, u, sp).expect("small box is contained in big box");
                report.big_to_small = report.big_to_small.max(rel(gb, (1.0 - g_big_np) * g));
                let bound = (1.0 + g_big_np.abs()) * (1.0 + g_small_nn.abs()) * comp(u, sp).abs()
                    / phi_n_max;
                if bound > 0.0 {
                    report.reduction_ratio = report.reduction_ratio.max(gb.abs() / bound);
                }
            }
            if let Some(g) = at(&small_p, &col_small_p, u, sp) {
                report.small_box_prime = report
                    .small_box_prime
                    .max(rel(g, comp(u, sp) / phi[n + 1][1]));
                let gb = at(&big_p, &col_big_p, u, sp).expect("small box is contained in big box");
                report.big_to_small_prime = report
                    .big_to_small_prime
                    .max(rel(gb, (1.0 + g_big_p_n1m) * g));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Weighted fit of `log mean` against `n^{1−2α}` with a bootstrap interval
/// on the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
    /// `−slope`, the fitted rate `c`.
    pub c_hat: f64,
}

impl DecayFit {
    pub fn ci_excludes_zero(&self) -> bool {
        self.slope_hi < 0.0 || self.slope_lo > 0.0
    }
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Fits `log E[X_n] ≈ a + b n^{1−2α}` from per-replica samples
/// `samples[r][i]` at `grid[i]`.
pub fn fit_decay(
    grid: &[usize],
    samples: &[Vec<f64>],
    alpha: f64,
    seed: u64,
) -> (Vec<ScanPoint>, DecayFit) {
    let m = samples.len();
    let x: Vec<f64> = grid
        .iter()
        .map(|&n| (n as f64).powf(1.0 - 2.0 * alpha))
        .collect();
    let points: Vec<ScanPoint> = grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let col: Vec<f64> = samples.iter().map(|r| r[i]).collect();
            let (mean, stderr) = mean_se(&col);
            ScanPoint { n, mean, stderr }
        })
        .collect();
    let fit_of = |means: &[f64], ses: &[f64]| -> LinearFit {
        let y: Vec<f64> = means.iter().map(|v| v.ln()).collect();
        let w: Vec<f64> = means
            .iter()
            .zip(ses)
            .map(|(mu, se)| {
                let rel = se / mu;
                if rel > 0.0 && rel.is_finite() {
                    1.0 / (rel * rel)
                } else {
                    1e12
                }
            })
            .collect();
        wls(&x, &y, &w)
    };
    let means: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let ses: Vec<f64> = points.iter().map(|p| p.stderr).collect();
    let base = fit_of(&means, &ses);
    let (lo, hi) = bootstrap_ci(m, BOOTSTRAP_RESAMPLES, seed, 0.95, |idx| {
        let (mm, ss): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|i| mean_se(&idx.iter().map(|&r| samples[r][i]).collect::<Vec<f64>>()))
            .unzip();
        fit_of(&mm, &ss).slope
    });
    (
        points,
        DecayFit {
            slope: base.slope,
            intercept: base.intercept,
            r2: base.r2,
            slope_lo: lo,
            slope_hi: hi,
            c_hat: -base.slope,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmEstimate {
    pub s: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub energy: f64,
    pub l: usize,
    pub u: usize,
    pub sigma: Spin,
    pub replicas: usize,
    pub resamples: usize,
    pub points: Vec<ScanPoint>,
    pub fit: DecayFit,
    /// `max_n E|G|^s / (λ^{−s}(a_u^{−s} + a_n^{−s}))`.
    pub apriori_constant: f64,
}

fn check_scan(params: &ModelParams, s: f64, grid: &[usize]) -> Result<()> {
    if params.alpha.as_f64() >= 0.5 {
        return Err(Error::SubcriticalOnly {
            alpha: params.alpha.as_f64(),
        });
    }
    if !(s > 0.0 && s <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "fractional power must lie in (0, 1/2], got {s}"
        )));
    }
    if grid.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least three grid points".into(),
        ));
    }
    Ok(())
}

/// Monte Carlo `E[|G_{ω,L}(u, σ; n, −; E)|^s]` over the `n` grid on the box
/// `Λ_L`. Replicas hitting a near-singular factorization are redrawn from
/// fresh streams and counted in `resamples`.
#[allow(clippy::too_many_arguments)]
pub fn fractional_moment_scan(
    params: &ModelParams,
    spec: &DistributionSpec,
    energy: f64,
    u: usize,
    sigma: Spin,
    s: f64,
    grid: &[usize],
    l: usize,
    m: usize,
    seed: u64,
) -> Result<FmEstimate> {
    check_scan(params, s, grid)?;
    let boxd = BoxDescriptor::lambda(l);
    if boxd.index_of(u, sigma).is_none() || grid.iter().any(|&n| n == 0 || n > l) {
        return Err(Error::SiteOutOfRange {
            site: u,
            lo: 1,
            hi: l,
        });
    }
    let rows: Vec<Result<(Vec<f64>, usize)>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let mut attempt = 0u64;
            loop {
                let stream = r + attempt * m as u64;
                let path = sample_replica(params, spec, l, seed, stream);
                let op = assemble_operator(params, &path, boxd)?;
                match GreenSolver::new(&op, energy) {
                    Ok(solver) => {
                        let col = solver.column(u, sigma)?;
                        let vals = grid
                            .iter()
                            .map(|&n| {
                                col[boxd.index_of(n, Spin::Minus).expect("grid inside box")]
                                    .abs()
                                    .powf(s)
                            })
                            .collect();
                        return Ok((vals, attempt as usize));
                    }
                    Err(Error::NearSingular { .. }) if attempt < 16 => attempt += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect();
    let mut samples = Vec::with_capacity(m);
    let mut resamples = 0;
    for r in rows {
        let (v, a) = r?;
        samples.push(v);
        resamples += a;
    }
    let (points, fit) = fit_decay(grid, &samples, params.alpha.as_f64(), seed ^ 0xf00d);
    let au = params.envelope_at(u);
    let apriori_constant = points
        .iter()
        .map(|p| {
            p.mean / (params.lambda.powf(-s) * (au.powf(-s) + params.envelope_at(p.n).powf(-s)))
        })
        .fold(0.0, f64::max);
    if !fit.ci_excludes_zero() {
        return Err(Error::InsufficientReplicas {
            lo: fit.slope_lo,
            hi: fit.slope_hi,
        });
    }
    Ok(FmEstimate {
        s,
        alpha: params.alpha.as_f64(),
        lambda: params.lambda,
        energy,
        l,
        u,
        sigma,
        replicas: m,
        resamples,
        points,
        fit,
        apriori_constant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeMomentReport {
    pub s: f64,
    pub u: usize,
    pub phi0_angle: f64,
    pub replicas: usize,
    pub points: Vec<ScanPoint>,
    pub fit: DecayFit,
}

/// Monte Carlo `E[‖T_{[u,n]} φ_0‖^{−s}]` with `φ_0 = (cos θ_0, sin θ_0)`.
#[allow(clippy::too_many_arguments)]
pub fn negative_moment_scan(
    params: &ModelParams,
    spec: &DistributionSpec,
    energy: f64,
    u: usize,
    s: f64,
    theta0: f64,
    grid: &[usize],
    m: usize,
    seed: u64,
) -> Result<NegativeMomentReport> {
    if s.is_nan() || s <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "power must be positive, got {s}"
        )));
    }
    if grid.len() < 3 || grid.iter().any(|&n| n < u) || u == 0 {
        return Err(Error::InvalidParameter(
            "grid must have >= 3 points, all >= u >= 1".into(),
        ));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    let n_max = *sorted.last().expect("nonempty grid");
    let samples: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_replica(params, spec, n_max, seed, r);
            let mut w = VectorWalker::new([theta0.cos(), theta0.sin()], u);
            let mut out = vec![0.0; grid.len()];
            let mut site = u;
            for (idx, &target) in sorted.iter().enumerate() {
                while site < target {
                    w.push(transfer_from_potential(
                        energy,
                        params.m,
                        path.v1(site),
                        path.v2(site + 1),
                        System::First,
                    ));
                    site += 1;
                }
                out[idx] = (-s * w.log_norm).exp();
            }
            let mut by_grid = vec![0.0; grid.len()];
            for (i, &g) in grid.iter().enumerate() {
                let pos = sorted
                    .iter()
                    .position(|&x| x == g)
                    .expect("grid value present");
                by_grid[i] = out[pos];
            }
            by_grid
        })
        .collect();
    let alpha = params.alpha.as_f64();
    let (points, fit) = fit_decay(grid, &samples, alpha, seed ^ 0xbeef);
    Ok(NegativeMomentReport {
        s,
        u,
        phi0_angle: theta0,
        replicas: m,
        points,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBound {
    pub block: usize,
    pub points: Vec<(usize, f64, f64)>,
    /// Least-squares `c` in `1 − E ≈ c l^{−2α}`.
    pub c_fit: f64,
}

/// `E[‖T_{ln₀} ⋯ T_{(l−1)n₀+1} φ_0‖^{−s}]` for each block index `l`.
#[allow(clippy::too_many_arguments)]
pub fn block_negative_moments(
    params: &ModelParams,
    spec: &DistributionSpec,
    energy: f64,
    s: f64,
    block: usize,
    l_grid: &[usize],
    m: usize,
    seed: u64,
) -> Result<BlockBound> {
    if block == 0 || l_grid.is_empty() || l_grid.contains(&0) {
        return Err(Error::InvalidParameter(
            "block length and block indices must be positive".into(),
        ));
    }
    let l_max = *l_grid.iter().max().expect("nonempty");
    let len = l_max * block + 1;
    let samples: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_replica(params, spec, len, seed, r);
            l_grid
                .iter()
                .map(|&l| {
                    let start = (l - 1) * block + 1;
                    let p =
                        product_raw(energy, params.m, &path, start, start + block, System::First)
                            .expect("path covers every block");
                    let (ln, _) = p.apply_log([1.0, 0.0]);
                    (-s * ln).exp()
                })
                .collect()
        })
        .collect();
    let alpha = params.alpha.as_f64();
    let mut points = Vec::new();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &l) in l_grid.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|r| r[i]).collect();
        let (mean, se) = mean_se(&col);
        points.push((l, mean, se));
        let x = (l as f64).powf(-2.0 * alpha);
        sxy += x * (1.0 - mean);
        sxx += x * x;
    }
    Ok(BlockBound {
        block,
        points,
        c_fit: sxy / sxx,
    })
}

/// `max_{n ∈ grid} E[‖T_{ω,n}‖^s]`.
pub fn transfer_norm_moment_sup(
    params: &ModelParams,
    spec: &DistributionSpec,
    energy: f64,
    s: f64,
    grid: &[usize],
    m: usize,
    seed: u64,
) -> f64 {
    let n_max = grid.iter().copied().max().unwrap_or(1);
    let sums: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_replica(params, spec, n_max + 1, seed, r);
            grid.iter()
                .map(|&n| {
                    transfer_from_potential(
                        energy,
                        params.m,
                        path.v1(n),
                        path.v2(n + 1),
                        System::First,
                    )
                    .norm()
                    .powf(s)
                })
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|i| sums.iter().map(|r| r[i]).sum::<f64>() / m as f64)
        .fold(0.0, f64::max)
}
