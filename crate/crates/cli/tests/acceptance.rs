//! Acceptance suite. Each test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured) and then asserts.

use diracloc::disorder::{sample_path, sample_replica, DistributionSpec};
use diracloc::dynamics::{
    heisenberg_horizon, horizon_doubling, propagate, time_averaged_truncated_moment, InitialState,
};
use diracloc::eigen::{diagonalize, diagonalize_window, DEFAULT_DIMENSION_CAP};
use diracloc::greens::{fractional_moment_scan, negative_moment_scan, verify_resolvent_identities};
use diracloc::linalg::norm2;
use diracloc::lyapunov::{beta_value, estimate_beta, r4_boundedness_probe};
use diracloc::model::{
    assemble_operator, energy_context, BoxDescriptor, Exponent, ModelParams, Spin,
};
use diracloc::phase::{critical_energies, lambda_critical};
use diracloc::prufer::{
    basis_at, check_excluded_k, martingale_diagnostics, prufer_step, run_from, sandwich_constants,
    PruferState, Recording,
};
use diracloc::spectra::{correlator, correlator_scan, eigenfunction_profile, parseval_sum};
use diracloc::transfer::{
    free_transfer, perturbation_matrices, transfer_raw, System, VectorWalker,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn spec() -> DistributionSpec {
    DistributionSpec::default()
}

#[test]
fn criterion_1_closed_form_lyapunov() {
    let start = Instant::now();
    let p = ModelParams::new(0.0, 0.3, Exponent::HALF).unwrap();
    let ctx = energy_context(1.0, 0.0).unwrap();
    let est = estimate_beta(&ctx, &p, &spec(), 1_000_000, 100, 2024).unwrap();
    let target = 0.3f64 * 0.3 / 3.0;
    let rel = (est.beta_hat - target).abs() / target;
    let secs = start.elapsed().as_secs_f64();
    let pass = rel <= 0.10 && secs <= 300.0;
    report(
        1,
        pass,
        &format!(
            "N=1e6 M=100: beta_hat = {:.5} +- {:.5}, target 0.03, rel err {rel:.4} (tol 0.10); Prufer estimate {:.5} +- {:.5}; {secs:.1}s (limit 300s)",
            est.beta_hat, est.stderr, est.beta_hat_prufer, est.stderr_prufer
        ),
    );
    assert!(pass);
}

/// `√F(E)` straight from its definition in terms of `E` and `m`.
fn coupling_threshold(e: f64, m: f64) -> f64 {
    (0.5 * (e * e - m * m) * (m * m + 4.0 - e * e) / (m * m + e * e)).sqrt()
}

fn grid_search_max(m: f64) -> f64 {
    let (mut lo, mut hi) = (m, (m * m + 4.0).sqrt());
    let mut best = 0.0;
    while hi - lo > 1e-13 {
        let n = 1000;
        let step = (hi - lo) / n as f64;
        let mut arg = lo;
        best = 0.0;
        for i in 0..=n {
            let e = lo + step * i as f64;
            let v = coupling_threshold(e, m);
            if v > best {
                best = v;
                arg = e;
            }
        }
        lo = (arg - step).max(m);
        hi = (arg + step).min((m * m + 4.0).sqrt());
    }
    best
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (f(mid) > 0.0) == (fa > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[test]
fn criterion_2_phase_thresholds() {
    let star = lambda_critical(1.0).unwrap().lambda_star;
    let oracle = grid_search_max(1.0);
    let (lo, hi) = critical_energies(0.5, 1.0).unwrap();
    let g = |e: f64| coupling_threshold(e, 1.0) - 0.5;
    let top = 5f64.sqrt();
    let peak = bisect(
        |e| coupling_threshold(e + 1e-7, 1.0) - coupling_threshold(e, 1.0),
        1.0 + 1e-9,
        top - 1e-9,
    );
    let (olo, ohi) = (bisect(g, 1.0 + 1e-12, peak), bisect(g, peak, top - 1e-12));
    let d_star = (star - (3f64.sqrt() - 1.0))
        .abs()
        .max((star - oracle).abs());
    let d_e = (lo - olo)
        .abs()
        .max((hi - ohi).abs())
        .max((lo - 1.14624).abs())
        .max((hi - 2.04600).abs());
    let pass = d_star <= 1e-9 && d_e <= 1e-5;
    report(
        2,
        pass,
        &format!("lambda*(1) = {star:.12} (oracle {oracle:.12}, dev {d_star:.1e}, tol 1e-9); E*+- = ({lo:.6}, {hi:.6}) dev {d_e:.1e} (tol 1e-5)"),
    );
    assert!(pass);
}

#[derive(Default)]
struct Worst {
    det_t: f64,
    decomposition: f64,
    det_p: f64,
    basis_shift: f64,
    prufer_step: f64,
    sandwich: f64,
    resolvent: f64,
    reduction: f64,
    wronskian: f64,
    wronskian_sites: usize,
    normalization: f64,
    unitarity: f64,
    reversibility: f64,
}

fn random_params(rng: &mut ChaCha8Rng) -> (ModelParams, f64) {
    let m = rng.random_range(0.0..1.5);
    let lambda = rng.random_range(0.0..2.0);
    let alpha = Exponent::value(rng.random_range(0.2..1.2)).unwrap();
    let p = ModelParams::new(m, lambda, alpha).unwrap();
    let top = (m * m + 4.0).sqrt();
    let e = m + (top - m) * rng.random_range(0.05..0.95);
    (p, e)
}

#[test]
fn criterion_3_exact_identities() {
    const TOL: f64 = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut w = Worst::default();
    let draws = 2000;
    for draw in 0..draws {
        let (p, e) = random_params(&mut rng);
        let m = p.m;
        let ctx = energy_context(e, m).unwrap();
        let path = sample_path(&p, &spec(), 80, draw as u64);
        for system in [System::First, System::Second] {
            let [a1, a2, a3] = perturbation_matrices(&ctx, system);
            let t0 = free_transfer(&ctx, system);
            let sign = if system == System::First { -1.0 } else { 1.0 };
            for n in 1..60 {
                let t = transfer_raw(e, m, &path, n, system).unwrap();
                w.det_t = w
                    .det_t
                    .max((t.det() - 1.0).abs() / t.frobenius_sq().max(1.0));
                let v2 = if system == System::First {
                    path.v2(n + 1)
                } else {
                    path.v2(n)
                };
                let v1 = path.v1(n);
                let rebuilt = t0 + a1.scale(v1) + a2.scale(v2) + a3.scale(v1 * v2);
                w.decomposition = w.decomposition.max((rebuilt - t).max_abs() / t.max_abs());
                let pn = basis_at(&ctx, n, system).unwrap().matrix;
                let pn1 = basis_at(&ctx, n + 1, system).unwrap().matrix;
                w.det_p = w.det_p.max((pn.det() - sign * ctx.sin_2k).abs());
                w.basis_shift = w.basis_shift.max((pn1 - t0 * pn).max_abs());
            }
            let mut s = PruferState::from_angle(&ctx, rng.random_range(-3.0..3.0), system);
            for _ in 1..40 {
                let n = s.n;
                let r = s.log_r.exp();
                let phi = basis_at(&ctx, n, system)
                    .unwrap()
                    .matrix
                    .apply([r * s.theta.cos(), r * s.theta.sin()]);
                let target = transfer_raw(e, m, &path, n, system).unwrap().apply(phi);
                s = prufer_step(&s, &ctx, &path).unwrap();
                let r = s.log_r.exp();
                let got = basis_at(&ctx, n + 1, system)
                    .unwrap()
                    .matrix
                    .apply([r * s.theta.cos(), r * s.theta.sin()]);
                let d = ((got[0] - target[0]).abs() + (got[1] - target[1]).abs()) / norm2(target);
                w.prufer_step = w.prufer_step.max(d);
            }
        }
        let (c_lo, c_hi) = sandwich_constants(&ctx);
        let phi1 = [m + e - path.v2(1), 1.0];
        let start = PruferState::from_vector(&ctx, phi1, System::First).unwrap();
        let run = run_from(&ctx, &path, 79, start, Recording::Full).unwrap();
        let mut walker = VectorWalker::new(phi1, 1);
        for row in &run.rows {
            if row.n > 1 {
                walker.push(transfer_raw(e, m, &path, row.n - 1, System::First).unwrap());
            }
            let log_ratio = 2.0 * (walker.log_norm - row.log_r);
            let excess = (c_lo.ln() - log_ratio).max(log_ratio - c_hi.ln()).max(0.0);
            w.sandwich = w.sandwich.max(excess);
        }
        let a = PruferState::from_vector(&ctx, [1.0, 0.0], System::First).unwrap();
        let b = PruferState::from_vector(&ctx, [0.0, 1.0], System::First).unwrap();
        let ra = run_from(&ctx, &path, 79, a, Recording::Full).unwrap();
        let rb = run_from(&ctx, &path, 79, b, Recording::Full).unwrap();
        // Past R_1 R_2 ~ 1e4 the phase difference drops below what the
        // stored angles resolve to 1e-8.
        for (x, y) in ra
            .rows
            .iter()
            .zip(&rb.rows)
            .take_while(|(x, y)| x.log_r + y.log_r <= 4.0 * std::f64::consts::LN_10)
        {
            let wr = (x.log_r + y.log_r).exp() * ctx.sin_2k * (x.theta_bar - y.theta_bar).sin();
            w.wronskian = w.wronskian.max((wr - 1.0).abs());
            w.wronskian_sites += 1;
        }
        let n = rng.random_range(4..30);
        let l = n + rng.random_range(2..40);
        let res = verify_resolvent_identities(&path, e, n, l).unwrap();
        w.resolvent = w.resolvent.max(res.max_residual());
        w.reduction = w.reduction.max(res.reduction_ratio);
    }
    let spectral_draws = 300;
    for draw in 0..spectral_draws {
        let (p, _) = random_params(&mut rng);
        let l = rng.random_range(10..60);
        let boxd = if draw % 2 == 0 {
            BoxDescriptor::lambda(l)
        } else {
            BoxDescriptor::lambda_prime(l)
        };
        let path = sample_path(&p, &spec(), l + 1, 10_000 + draw as u64);
        let d = diagonalize(&assemble_operator(&p, &path, boxd).unwrap()).unwrap();
        for u in [2, l / 2, l] {
            for sigma in [Spin::Plus, Spin::Minus] {
                if boxd.index_of(u, sigma).is_none() {
                    continue;
                }
                let q = correlator(&d, u, sigma, (f64::NEG_INFINITY, f64::INFINITY), 0.5).unwrap();
                let own = q.get(u, sigma).unwrap().q;
                w.normalization = w
                    .normalization
                    .max((own - 1.0).abs())
                    .max((parseval_sum(&d, u, sigma).unwrap() - 1.0).abs());
            }
        }
        let psi0 = InitialState::Site {
            n: 1 + draw % l,
            spin: Spin::Minus,
        }
        .to_vector(boxd)
        .unwrap();
        let dim = psi0.len();
        let state = (psi0.clone(), vec![0.0; dim]);
        let t = rng.random_range(1.0..200.0);
        let fwd = propagate(&d, &state, t);
        let norm: f64 = fwd.0.iter().chain(&fwd.1).map(|x| x * x).sum();
        w.unitarity = w.unitarity.max((norm - 1.0).abs());
        let back = propagate(&d, &fwd, -t);
        let err = back
            .0
            .iter()
            .zip(&psi0)
            .map(|(a, b)| (a - b).abs())
            .chain(back.1.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        w.reversibility = w.reversibility.max(err);
    }
    let checks = [
        ("det T", w.det_t),
        ("decomposition", w.decomposition),
        ("det P", w.det_p),
        ("P_n+1 = T P_n", w.basis_shift),
        ("Prufer step", w.prufer_step),
        ("sandwich excess", w.sandwich),
        ("resolvent identities", w.resolvent),
        ("Wronskian", w.wronskian),
        ("Q(u;u) = 1", w.normalization),
        ("unitarity", w.unitarity),
        ("reversibility", w.reversibility),
    ];
    let pass = checks.iter().all(|(_, v)| *v <= TOL) && w.reduction <= 1.0 + TOL;
    let detail: Vec<String> = checks.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    report(
        3,
        pass,
        &format!("{draws} transfer draws, {spectral_draws} spectral draws, tol {TOL:.0e}; {}; reduction ratio {:.3} (<= 1); Wronskian checked at {} sites", detail.join(", "), w.reduction, w.wronskian_sites),
    );
    assert!(pass);
}

#[test]
fn criterion_4_subcritical_decay() {
    let start = Instant::now();
    let p = ModelParams::new(0.0, 1.0, Exponent::value(0.3).unwrap()).unwrap();
    let grid: Vec<usize> = (1..=10).map(|i| 40 * i).collect();
    let (l, m) = (400, 1000);
    let fm = fractional_moment_scan(&p, &spec(), 1.0, 1, Spin::Minus, 0.1, &grid, l, m, 7).unwrap();
    let neg = negative_moment_scan(&p, &spec(), 1.0, 1, 0.05, 0.0, &grid, m, 7).unwrap();
    let cor = correlator_scan(&p, &spec(), (0.8, 1.2), &grid, l, m, 7).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = |f: &diracloc::greens::DecayFit| f.slope < 0.0 && f.r2 >= 0.9 && f.ci_excludes_zero();
    let pass = ok(&fm.fit) && ok(&neg.fit) && ok(&cor.fit) && secs <= 900.0;
    let show = |name: &str, f: &diracloc::greens::DecayFit| {
        format!(
            "{name} slope {:.4} CI [{:.4}, {:.4}] R2 {:.4}",
            f.slope, f.slope_lo, f.slope_hi, f.r2
        )
    };
    report(
        4,
        pass,
        &format!(
            "L={l} M={m}: {}; {}; {}; {secs:.0}s (limit 900s)",
            show("fractional moment", &fm.fit),
            show("negative moment", &neg.fit),
            show("correlator", &cor.fit)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_eigenfunction_decay() {
    let p = ModelParams::new(0.0, 1.0, Exponent::value(0.3).unwrap()).unwrap();
    let r = eigenfunction_profile(&p, &spec(), (0.8, 1.2), 2000, &[1]).unwrap();
    let dev = (r.median_ratio + 1.0).abs();
    let pass = dev <= 0.15;
    report(
        5,
        pass,
        &format!(
            "L=2000, {} eigenpairs in [0.8, 1.2]: median slope/beta = {:.4}, |median + 1| = {dev:.4} (tol 0.15); median |slope/beta + 1| = {:.3}",
            r.profiles.len(),
            r.median_ratio,
            r.median_deviation
        ),
    );
    assert!(pass);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn loglog_slope(x: &[usize], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Median over seeds of the horizon-doubling ratio in the box `Λ_L` and of
/// `sup ⟨|X|²⟩` on `Λ_2L` over `sup ⟨|X|²⟩` on `Λ_L`, both up to ten
/// Heisenberg times of the small box.
fn doubling_medians(
    p: &ModelParams,
    l: usize,
    window: (f64, f64),
    seeds: std::ops::RangeInclusive<u64>,
) -> (f64, f64) {
    let psi0 = InitialState::Site {
        n: 1,
        spin: Spin::Minus,
    };
    let mut horizon_ratios = Vec::new();
    let mut box_ratios = Vec::new();
    for seed in seeds {
        let path = sample_path(p, &spec(), 2 * l, seed);
        let decomp = |size: usize| {
            diagonalize_window(
                &assemble_operator(p, &path, BoxDescriptor::lambda(size)).unwrap(),
                window.0,
                window.1,
                DEFAULT_DIMENSION_CAP,
            )
            .unwrap()
        };
        let (base, doubled) = (decomp(l), decomp(2 * l));
        let horizon = heisenberg_horizon(&base).unwrap();
        let steps = (horizon.ceil() as usize).max(400);
        let hd = horizon_doubling(&base, &psi0, 2.0, horizon, steps).unwrap();
        let hb = horizon_doubling(&doubled, &psi0, 2.0, horizon, steps).unwrap();
        horizon_ratios.push(hd.ratio);
        box_ratios.push(hb.sup_half / hd.sup_half);
    }
    (median(horizon_ratios), median(box_ratios))
}

#[test]
fn criterion_6_dynamical_regimes() {
    // Horizon doubling counts as flat below 10% growth. A packet that fills
    // the box has sup ⟨|X|²⟩ ∝ L², so box doubling multiplies it by 4 while a
    // localized packet keeps it near 1; the geometric midpoint 2 separates them.
    const HORIZON_TOL: f64 = 1.10;
    const BOX_TOL: f64 = 2.0;
    let psi0 = InitialState::Site {
        n: 1,
        spin: Spin::Minus,
    };
    let window = (0.8, 1.2);
    let l = 400;
    let p = ModelParams::new(0.0, 1.0, Exponent::value(0.3).unwrap()).unwrap();
    let (h_med, b_med) = doubling_medians(&p, l, window, 1..=5);
    let free = ModelParams::new(0.0, 0.0, Exponent::value(0.3).unwrap()).unwrap();
    let (_, b_free) = doubling_medians(&free, l, window, 1..=1);
    let bounded = h_med <= HORIZON_TOL && b_med <= BOX_TOL && b_free > BOX_TOL;

    let m = 1.0;
    let lambda = 1.0;
    assert!(lambda > lambda_critical(m).unwrap().lambda_star);
    let q = ModelParams::new(m, lambda, Exponent::HALF).unwrap();
    let grid = [25usize, 50, 100, 200, 400];
    let path = sample_path(&q, &spec(), 1600, 1);
    let mut slopes = Vec::new();
    let mut monotone = true;
    for size in [800usize, 1600] {
        let d = diagonalize_window(
            &assemble_operator(&q, &path, BoxDescriptor::lambda(size)).unwrap(),
            1.2,
            2.0,
            DEFAULT_DIMENSION_CAP,
        )
        .unwrap();
        let horizon = diracloc::dynamics::default_horizon(d.dim(), m);
        let avg = time_averaged_truncated_moment(&d, &psi0, 6.0, &grid, horizon, 2000).unwrap();
        monotone &= avg.windows(2).all(|w| w[1] > w[0]);
        slopes.push(loglog_slope(&grid, &avg));
    }
    let rel = (slopes[1] - slopes[0]).abs() / slopes[0];
    let growing = monotone && slopes.iter().all(|&s| s >= 1.0) && rel <= 0.25;
    let pass = bounded && growing;
    report(
        6,
        pass,
        &format!(
            "alpha=0.3: median horizon-doubling ratio {h_med:.3} (tol {HORIZON_TOL}), median box-doubling ratio {b_med:.3} (tol {BOX_TOL}; free control {b_free:.2}); \
             alpha=1/2, lambda=1 > lambda*(1): truncated p=6 moment increasing={monotone}, log-log slopes {:.2} (L=800) {:.2} (L=1600), rel change {rel:.3} (need slopes >= 1, change <= 0.25)",
            slopes[0], slopes[1]
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_martingale_diagnostics() {
    let p = ModelParams::new(0.0, 0.1, Exponent::HALF).unwrap();
    let ctx = energy_context(1.0, 0.0).unwrap();
    check_excluded_k(&ctx).unwrap();
    let n = 1_000_000;
    let seeds = 50u64;
    let results: Vec<(bool, bool, f64, f64)> = (0..seeds)
        .map(|seed| {
            let path = sample_replica(&p, &spec(), n + 1, 77, seed);
            let r = martingale_diagnostics(&ctx, &path, n, 0.0).unwrap();
            let mmax = r
                .martingales
                .iter()
                .map(|x| x.abs() / r.s_n)
                .fold(0.0, f64::max);
            let qmax = r
                .phase_sums
                .iter()
                .map(|x| x.abs() / r.s_n)
                .fold(0.0, f64::max);
            (mmax < 0.05, qmax < 0.1, mmax, qmax)
        })
        .collect();
    let ok_m = results.iter().filter(|r| r.0).count();
    let ok_q = results.iter().filter(|r| r.1).count();
    let need = (0.9 * seeds as f64).ceil() as usize;
    let pass = ok_m >= need && ok_q >= need;
    let worst_m = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let worst_q = results.iter().map(|r| r.3).fold(0.0, f64::max);
    let beta = beta_value(&ctx, p.lambda);
    report(
        7,
        pass,
        &format!(
            "N=1e6, m=0, E=1, lambda=0.1 (beta {beta:.4}), {seeds} seeds: |M|/s_N < 0.05 in {ok_m}, |Q|/s_N < 0.1 in {ok_q} (need {need}); worst {worst_m:.4}, {worst_q:.4}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_supercritical_boundedness() {
    let energies: Vec<f64> = (0..5).map(|i| 0.8 + 0.1 * i as f64).collect();
    let (n, m) = (20_000, 400);
    let sup = ModelParams::new(0.0, 1.0, Exponent::ratio(1, 1).unwrap()).unwrap();
    let sub = ModelParams::new(0.0, 1.0, Exponent::value(0.4).unwrap()).unwrap();
    let a = r4_boundedness_probe(&sup, &spec(), &energies, n, m, 8).unwrap();
    let b = r4_boundedness_probe(&sub, &spec(), &energies, n, m, 8).unwrap();
    let pass = a.plateau && !a.growing && b.growing;
    let ratios = |r: &diracloc::lyapunov::R4Report| {
        r.points
            .iter()
            .map(|p| format!("{:.3}", p.ratio))
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        8,
        pass,
        &format!(
            "N={n}, M={m}: alpha=1 ratios E[R_N^4]/E[R_N/2^4] = [{}] plateau={}; alpha=0.4 ratios [{}] growing={}",
            ratios(&a),
            a.plateau,
            ratios(&b),
            b.growing
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let bin = env!("CARGO_BIN_EXE_diracloc");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
  "model": {"m": 0.0, "lambda": 1.0, "alpha": 0.3},
  "energies": {"values": [0.9, 1.0, 1.1]},
  "sizes": {"n": 2000, "l": 120},
  "seeds": {"base": 5, "replicas": 40},
  "probes": {"n_grid": [20, 40, 60, 80, 100, 120], "r4": true, "truncated_grid": [25, 50, 100], "steps": 100, "kappas": [0.5]}
}"#,
    )
    .unwrap();
    let commands = [
        "lyapunov",
        "phase-diagram",
        "green-decay",
        "dynamics",
        "eigen",
        "diagnostics",
        "validate-disorder",
    ];
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for cmd in commands {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{cmd}-{run}"));
            let status = Command::new(bin)
                .args([
                    cmd,
                    "--config",
                    config.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--format",
                    "both",
                ])
                .stdout(std::process::Stdio::null())
                .stderr(std::process::Stdio::null())
                .status()
                .unwrap();
            assert!(status.success(), "{cmd} exited with {status}");
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            outputs.push(
                files
                    .into_iter()
                    .map(|f| {
                        (
                            f.file_name().unwrap().to_owned(),
                            std::fs::read(&f).unwrap(),
                        )
                    })
                    .collect::<Vec<_>>(),
            );
        }
        for ((name_a, a), (name_b, b)) in outputs[0].iter().zip(&outputs[1]) {
            compared += 1;
            if name_a != name_b || a != b {
                mismatches.push(format!("{cmd}/{}", name_a.to_string_lossy()));
            }
        }
        if outputs[0].len() != outputs[1].len() {
            mismatches.push(format!("{cmd}: file sets differ"));
        }
    }
    let pass = mismatches.is_empty() && compared > 0;
    report(9, pass, &format!("{} subcommands run twice, {compared} output files compared byte-for-byte, mismatches: {mismatches:?}", commands.len()));
    assert!(pass);
}
