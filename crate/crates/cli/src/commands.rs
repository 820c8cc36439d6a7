//! One function per subcommand. Each reads a validated config and writes
//! its files through an output [`Writer`].

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{num, opt, Writer};
use crate::svg::{Cell, Plot, Series, Style};
use diracloc::disorder::{sample_path, validate_assumptions};
use diracloc::dynamics::{
    default_horizon, evolve, heisenberg_horizon, horizon_doubling, infinite_time_truncated_moment,
    moment_growth_exponent, stretched_moment_probe, time_averaged_truncated_moment, time_grid,
    EvolutionProbes, HorizonDoubling, InitialState, StretchedPoint,
};
use diracloc::eigen::{diagonalize, diagonalize_window, DEFAULT_DIMENSION_CAP};
use diracloc::greens::{fractional_moment_scan, negative_moment_scan, DecayFit};
use diracloc::lyapunov::{beta_value, estimate_beta, r4_boundedness_probe};
use diracloc::model::{
    assemble_operator, energy_context, in_band_interior, AlphaClass, BoxDescriptor, Exponent,
    ModelParams, Spin,
};
use diracloc::phase::{classify, critical_energies, lambda_critical, SpectralType};
use diracloc::prufer::martingale_diagnostics;
use diracloc::spectra::{profile_rows, profiles_for_path, rn_ratio_diagnostic};
use diracloc::stats::ols;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(diracloc::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<diracloc::Error> for CliError {
    fn from(e: diracloc::Error) -> Self {
        use diracloc::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::SubcriticalOnly { .. }
            | E::EnergyOutOfBand { .. }
            | E::DimensionCap { .. } => CliError::Config(ConfigError {
                line: None,
                message: e.to_string(),
            }),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

pub type CmdResult = Result<(), CliError>;

fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(ConfigError {
        line: None,
        message: message.into(),
    })
}

fn fit_json(f: &DecayFit) -> serde_json::Value {
    json!({ "slope": f.slope, "slope_ci": [f.slope_lo, f.slope_hi], "r2": f.r2, "c_hat": f.c_hat, "intercept": f.intercept })
}

pub fn lyapunov(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let params = cfg.model;
    if params.alpha_class() == AlphaClass::Supercritical {
        return Err(config_error(format!(
            "lyapunov estimation needs alpha <= 1/2, got {}",
            params.alpha
        )));
    }
    let energies = cfg.energies.points();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut err = Vec::new();
    for &e in &energies {
        eprintln!("lyapunov: E = {e}");
        let ctx = energy_context(e, params.m)?;
        match estimate_beta(
            &ctx,
            &params,
            &cfg.distribution,
            cfg.sizes.n,
            cfg.seeds.replicas,
            cfg.seeds.base,
        ) {
            Ok(est) => {
                rows.push(vec![
                    num(e),
                    num(params.lambda),
                    opt(est.closed_form),
                    num(est.beta_hat),
                    num(est.stderr),
                ]);
                points.push((e, est.beta_hat));
                err.push(est.stderr);
            }
            Err(refusal @ diracloc::Error::ExcludedK { .. }) => {
                eprintln!("lyapunov: skipping E = {e}: {refusal}");
                let closed = if ctx.near_edge {
                    None
                } else {
                    Some(beta_value(&ctx, params.lambda))
                };
                rows.push(vec![
                    num(e),
                    num(params.lambda),
                    opt(closed),
                    num(f64::NAN),
                    num(f64::NAN),
                ]);
            }
            Err(other) => return Err(other.into()),
        }
    }
    if cfg.output.format.csv() {
        out.csv(
            "lyapunov.csv",
            &["E", "lambda", "beta_closed", "beta_hat", "stderr"],
            &rows,
        )?;
    }
    if cfg.output.format.svg() {
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let curve: Vec<(f64, f64)> = (0..=200)
            .map(|i| lo + (hi - lo) * i as f64 / 200.0)
            .filter_map(|e| {
                energy_context(e, params.m)
                    .ok()
                    .filter(|c| !c.near_edge)
                    .map(|c| (e, beta_value(&c, params.lambda)))
            })
            .collect();
        let plot = Plot {
            title: format!(
                "Lyapunov exponent, m = {}, lambda = {}, alpha = {}",
                params.m, params.lambda, params.alpha
            ),
            xlabel: "E".into(),
            ylabel: "beta".into(),
            series: vec![
                Series {
                    label: "closed form".into(),
                    points: curve,
                    style: Style::Line,
                },
                Series {
                    label: "estimate".into(),
                    points,
                    style: Style::ErrorBars(err),
                },
            ],
            ..Plot::default()
        };
        out.svg("lyapunov.svg", &plot.render())?;
    }
    Ok(())
}

pub fn phase_diagram(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let m = cfg.model.m;
    let energies = cfg.energies.points();
    let lambdas = cfg.probes.lambdas.points();
    if lambdas.is_empty() {
        return Err(config_error("coupling grid for the phase diagram is empty"));
    }
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let half_step = |v: &[f64], i: usize| -> (f64, f64) {
        let lo = if i > 0 {
            (v[i] - v[i - 1]) / 2.0
        } else if v.len() > 1 {
            (v[1] - v[0]) / 2.0
        } else {
            0.05
        };
        let hi = if i + 1 < v.len() {
            (v[i + 1] - v[i]) / 2.0
        } else {
            lo
        };
        (v[i] - lo, v[i] + hi)
    };
    for (j, &lambda) in lambdas.iter().enumerate() {
        let params = ModelParams {
            lambda,
            alpha: Exponent::HALF,
            ..cfg.model
        };
        for (i, &e) in energies.iter().enumerate() {
            let t = classify(&params, e).spectral_type;
            rows.push(vec![num(e), num(lambda), t.as_str().to_string()]);
            let (x0, x1) = half_step(&energies, i);
            let (y0, y1) = half_step(&lambdas, j);
            let color = match t {
                SpectralType::Pp => "#f4a582",
                SpectralType::Sc => "#92c5de",
                SpectralType::Ac => "#b8e186",
                SpectralType::OutsideBand => "#e0e0e0",
            };
            cells.push(Cell {
                x0,
                x1,
                y0,
                y1,
                color,
            });
        }
    }
    let mut boundary = Vec::new();
    let mut lo_curve = Vec::new();
    let mut hi_curve = Vec::new();
    for &lambda in &lambdas {
        if let Some((a, b)) = critical_energies(lambda, m) {
            boundary.push(vec![num(lambda), num(a), num(b)]);
            lo_curve.push((a, lambda));
            hi_curve.push((b, lambda));
        }
    }
    let critical = lambda_critical(m).ok();
    if cfg.output.format.csv() {
        out.csv(
            "phase_diagram.csv",
            &["E", "lambda", "spectral_type"],
            &rows,
        )?;
        out.csv(
            "phase_boundary.csv",
            &["lambda", "E_minus", "E_plus"],
            &boundary,
        )?;
    }
    out.json(
        "phase_summary.json",
        &json!({
            "m": m,
            "lambda_star": critical.map(|c| c.lambda_star),
            "energy_star": critical.map(|c| c.energy_star),
            "band": [m, (m * m + 4.0).sqrt()],
        }),
    )?;
    if cfg.output.format.svg() {
        let mut series = vec![
            Series {
                label: "E*-".into(),
                points: lo_curve,
                style: Style::Line,
            },
            Series {
                label: "E*+".into(),
                points: hi_curve,
                style: Style::Line,
            },
        ];
        if let Some(c) = critical {
            let (e0, e1) = (energies[0], energies[energies.len() - 1]);
            series.push(Series {
                label: "lambda*".into(),
                points: vec![(e0, c.lambda_star), (e1, c.lambda_star)],
                style: Style::Line,
            });
        }
        let plot = Plot {
            title: format!("Spectral phases at alpha = 1/2, m = {m}"),
            xlabel: "E".into(),
            ylabel: "lambda".into(),
            series,
            cells,
            legend: vec![
                ("#f4a582", "pure point".into()),
                ("#92c5de", "singular continuous".into()),
                ("#b8e186", "absolutely continuous".into()),
                ("#e0e0e0", "outside band".into()),
            ],
        };
        out.svg("phase_diagram.svg", &plot.render())?;
    }
    Ok(())
}

pub fn green_decay(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let params = cfg.model;
    let p = &cfg.probes;
    let (l, mm, seed) = (cfg.sizes.l, cfg.seeds.replicas, cfg.seeds.base);
    if p.u > l || p.n_grid.iter().any(|&n| n > l) {
        return Err(config_error(format!(
            "source site u and all n_grid sites must lie in 1..={l}"
        )));
    }
    let mut fm_rows = Vec::new();
    let mut neg_rows = Vec::new();
    let mut summary = Vec::new();
    let mut series = Vec::new();
    let alpha = params.alpha.as_f64();
    for &e in &cfg.energies.points() {
        eprintln!("green-decay: E = {e}");
        let fm = fractional_moment_scan(
            &params,
            &cfg.distribution,
            e,
            p.u,
            Spin::Minus,
            p.s,
            &p.n_grid,
            l,
            mm,
            seed,
        )?;
        let neg = negative_moment_scan(
            &params,
            &cfg.distribution,
            e,
            p.u,
            p.s_negative,
            p.theta0,
            &p.n_grid,
            mm,
            seed,
        )?;
        for pt in &fm.points {
            fm_rows.push(vec![
                pt.n.to_string(),
                num(pt.mean),
                num(pt.stderr),
                num(p.s),
                num(alpha),
                num(params.lambda),
                num(e),
                l.to_string(),
                mm.to_string(),
            ]);
        }
        for pt in &neg.points {
            neg_rows.push(vec![
                pt.n.to_string(),
                num(pt.mean),
                num(pt.stderr),
                num(p.s_negative),
                num(alpha),
                num(params.lambda),
                num(e),
                mm.to_string(),
            ]);
        }
        let x = |n: usize| (n as f64).powf(1.0 - 2.0 * alpha);
        series.push(Series {
            label: format!("log E|G|^s, E = {e}"),
            points: fm.points.iter().map(|pt| (x(pt.n), pt.mean.ln())).collect(),
            style: Style::Points,
        });
        series.push(Series {
            label: format!("fit, E = {e}"),
            points: fm
                .points
                .iter()
                .map(|pt| (x(pt.n), fm.fit.intercept + fm.fit.slope * x(pt.n)))
                .collect(),
            style: Style::Line,
        });
        summary.push(json!({
            "E": e,
            "fractional_moment": fit_json(&fm.fit),
            "resamples": fm.resamples,
            "apriori_constant": fm.apriori_constant,
            "negative_moment": fit_json(&neg.fit),
        }));
    }
    if cfg.output.format.csv() {
        out.csv(
            "green_decay.csv",
            &[
                "n",
                "mean_abs_G_pow_s",
                "stderr",
                "s",
                "alpha",
                "lambda",
                "E",
                "L",
                "M",
            ],
            &fm_rows,
        )?;
        out.csv(
            "negative_moments.csv",
            &[
                "n",
                "mean_norm_pow_neg_s",
                "stderr",
                "s",
                "alpha",
                "lambda",
                "E",
                "M",
            ],
            &neg_rows,
        )?;
    }
    out.json(
        "green_decay_summary.json",
        &json!({ "energies": summary, "L": l, "M": mm, "s": p.s, "s_negative": p.s_negative }),
    )?;
    if cfg.output.format.svg() {
        let plot = Plot {
            title: format!(
                "Fractional moments, alpha = {}, lambda = {}",
                params.alpha, params.lambda
            ),
            xlabel: "n^(1-2 alpha)".into(),
            ylabel: "log mean |G|^s".into(),
            series,
            ..Plot::default()
        };
        out.svg("green_decay.svg", &plot.render())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DynamicsSummary {
    l: usize,
    window: [f64; 2],
    horizon: f64,
    eigenpairs: usize,
    horizon_doubling: HorizonDoubling,
    box_doubling_ratio: f64,
    truncated_power: f64,
    truncated_grid: Vec<usize>,
    time_averaged: Vec<f64>,
    infinite_time: Vec<f64>,
    infinite_time_doubled_box: Vec<f64>,
    growth_exponent: f64,
    growth_exponent_doubled_box: f64,
    stretched: Vec<StretchedPoint>,
    ballistic_exponent: Option<f64>,
}

fn loglog_slope(ns: &[usize], vals: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    ols(&x, &y).slope
}

pub fn dynamics(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let params = cfg.model;
    let p = &cfg.probes;
    let l = cfg.sizes.l;
    let [lo, hi] = p.window;
    let path = sample_path(&params, &cfg.distribution, 2 * l, cfg.seeds.base);
    let base = diagonalize_window(
        &assemble_operator(&params, &path, BoxDescriptor::lambda(l))?,
        lo,
        hi,
        DEFAULT_DIMENSION_CAP,
    )?;
    let doubled = diagonalize_window(
        &assemble_operator(&params, &path, BoxDescriptor::lambda(2 * l))?,
        lo,
        hi,
        DEFAULT_DIMENSION_CAP,
    )?;
    if base.is_empty() {
        return Err(diracloc::Error::WindowEmpty { lo, hi }.into());
    }
    let psi0 = InitialState::Site {
        n: 1,
        spin: Spin::Minus,
    };
    let horizon = p
        .horizon
        .or_else(|| heisenberg_horizon(&base))
        .unwrap_or_else(|| default_horizon(base.dim(), params.m));
    let probes = EvolutionProbes {
        moments: p.moments.clone(),
        truncated: p
            .truncated_grid
            .iter()
            .filter(|&&n| n <= l)
            .map(|&n| (p.truncated_power, n))
            .collect(),
        radii: p.radii.clone(),
        kappas: p.kappas.clone(),
    };
    let times = time_grid(horizon, p.steps);
    let trace = evolve(&base, &psi0, &times, &probes)?;
    let hd = horizon_doubling(&base, &psi0, 2.0, horizon, p.steps)?;
    let hd_box = horizon_doubling(&doubled, &psi0, 2.0, horizon, p.steps)?;
    let grid: Vec<usize> = p
        .truncated_grid
        .iter()
        .copied()
        .filter(|&n| n <= l)
        .collect();
    let time_averaged =
        time_averaged_truncated_moment(&base, &psi0, p.truncated_power, &grid, horizon, p.steps)?;
    let infinite_time = infinite_time_truncated_moment(&base, &psi0, p.truncated_power, &grid)?;
    let infinite_time_doubled_box =
        infinite_time_truncated_moment(&doubled, &psi0, p.truncated_power, &grid)?;
    let stretched = if p.kappas.is_empty() {
        Vec::new()
    } else {
        stretched_moment_probe(&base, &doubled, &psi0, &p.kappas, horizon, p.steps)?
    };
    let ballistic_exponent = if params.lambda == 0.0 {
        let times: Vec<f64> = (1..=10).map(|i| l as f64 / 40.0 * i as f64).collect();
        Some(moment_growth_exponent(&base, &psi0, &times)?)
    } else {
        None
    };
    let summary = DynamicsSummary {
        l,
        window: p.window,
        horizon,
        eigenpairs: base.len(),
        horizon_doubling: hd,
        box_doubling_ratio: hd_box.sup_half / hd.sup_half,
        truncated_power: p.truncated_power,
        growth_exponent: if grid.len() >= 2 {
            loglog_slope(&grid, &time_averaged)
        } else {
            f64::NAN
        },
        growth_exponent_doubled_box: if grid.len() >= 2 {
            loglog_slope(&grid, &infinite_time_doubled_box)
        } else {
            f64::NAN
        },
        truncated_grid: grid,
        time_averaged,
        infinite_time,
        infinite_time_doubled_box,
        stretched,
        ballistic_exponent,
    };
    if cfg.output.format.csv() {
        let mut headers = vec!["t".to_string(), "norm".to_string()];
        headers.extend(p.moments.iter().map(|q| format!("moment_{q}")));
        headers.extend(
            probes
                .truncated
                .iter()
                .map(|(q, n)| format!("truncated_{q}_{n}")),
        );
        headers.extend(p.radii.iter().map(|r| format!("tail_{r}")));
        headers.extend(p.kappas.iter().map(|k| format!("log_stretched_{k}")));
        let rows: Vec<Vec<String>> = (0..times.len())
            .map(|i| {
                let mut r = vec![num(times[i]), num(trace.norms[i])];
                for block in [
                    &trace.moments,
                    &trace.truncated,
                    &trace.survival,
                    &trace.log_stretched,
                ] {
                    r.extend(block.iter().map(|row| num(row[i])));
                }
                r
            })
            .collect();
        let h: Vec<&str> = headers.iter().map(String::as_str).collect();
        out.csv("trace.csv", &h, &rows)?;
    }
    out.json("dynamics_summary.json", &summary)?;
    if cfg.output.format.svg() && !trace.moments.is_empty() {
        let plot = Plot {
            title: format!(
                "Position moment, alpha = {}, lambda = {}, L = {l}",
                params.alpha, params.lambda
            ),
            xlabel: "t".into(),
            ylabel: format!("<|X|^{}>", p.moments[0]),
            series: vec![Series {
                label: "moment".into(),
                points: times
                    .iter()
                    .copied()
                    .zip(trace.moments[0].iter().copied())
                    .collect(),
                style: Style::Line,
            }],
            ..Plot::default()
        };
        out.svg("trace.svg", &plot.render())?;
    }
    Ok(())
}

pub fn eigen(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let params = cfg.model;
    let l = cfg.sizes.l;
    let [lo, hi] = cfg.probes.window;
    let path = sample_path(&params, &cfg.distribution, l, cfg.seeds.base);
    let op = assemble_operator(&params, &path, BoxDescriptor::lambda_prime(l))?;
    let full = diagonalize(&op)?;
    let report = profiles_for_path(&params, &path, lo, hi, l)?;
    let window = diagonalize_window(&op, lo, hi, DEFAULT_DIMENSION_CAP)?;
    let mid = 0.5 * (lo + hi);
    let pick = (0..window.len())
        .min_by(|&a, &b| {
            (window.eigenvalues[a] - mid)
                .abs()
                .total_cmp(&(window.eigenvalues[b] - mid).abs())
        })
        .expect("window is non-empty");
    let rows = profile_rows(
        &window.eigenvectors[pick],
        window.boxd,
        params.alpha.as_f64(),
    );
    if cfg.output.format.csv() {
        let spec: Vec<Vec<String>> = full
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), num(*e)])
            .collect();
        out.csv("spectrum.csv", &["index", "eigenvalue"], &spec)?;
        let prof: Vec<Vec<String>> = report
            .profiles
            .iter()
            .map(|p| {
                vec![
                    num(p.energy),
                    p.center.to_string(),
                    num(p.beta),
                    num(p.slope),
                    num(p.ratio),
                    num(p.r2),
                    opt(p.stretched_slope),
                    num(p.kappa),
                    num(p.lower_bound),
                ]
            })
            .collect();
        out.csv(
            "eigen_profiles.csv",
            &[
                "E",
                "center",
                "beta",
                "slope",
                "ratio",
                "r2",
                "stretched_slope",
                "kappa",
                "lower_bound",
            ],
            &prof,
        )?;
        let pr: Vec<Vec<String>> = rows
            .iter()
            .map(|(n, ln, s)| vec![n.to_string(), num(*ln), num(*s)])
            .collect();
        out.csv("profile.csv", &["n", "log_norm", "s_n"], &pr)?;
    }
    out.json(
        "eigen_summary.json",
        &json!({
            "L": l,
            "window": [lo, hi],
            "eigenvalues": full.len(),
            "max_residual": full.max_residual(&op),
            "profiles": report.profiles.len(),
            "median_ratio": report.median_ratio,
            "median_deviation": report.median_deviation,
            "profile_energy": window.eigenvalues[pick],
        }),
    )?;
    if cfg.output.format.svg() {
        let e = window.eigenvalues[pick];
        let beta = energy_context(e, params.m)
            .ok()
            .filter(|c| !c.near_edge)
            .map(|c| beta_value(&c, params.lambda));
        let mut series = vec![Series {
            label: "log |Phi_n|".into(),
            points: rows.iter().map(|r| (r.2, r.1)).collect(),
            style: Style::Line,
        }];
        if let Some(b) = beta {
            let peak = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            let s0 = rows.iter().find(|r| r.1 == peak).map_or(0.0, |r| r.2);
            series.push(Series {
                label: "-beta s_n".into(),
                points: rows
                    .iter()
                    .map(|r| (r.2, peak - b * (r.2 - s0).abs()))
                    .collect(),
                style: Style::Line,
            });
        }
        let plot = Plot {
            title: format!("Eigenfunction profile at E = {e:.4}"),
            xlabel: "s_n".into(),
            ylabel: "log |Phi_n|".into(),
            series,
            ..Plot::default()
        };
        out.svg("profile.svg", &plot.render())?;
    }
    Ok(())
}

pub fn diagnostics(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let params = cfg.model;
    let n = cfg.sizes.n;
    let mut rows = Vec::new();
    let mut refusals = Vec::new();
    for &e in &cfg.energies.points() {
        eprintln!("diagnostics: E = {e}");
        let path = sample_path(&params, &cfg.distribution, n + 1, cfg.seeds.base);
        let attempt = energy_context(e, params.m).and_then(|ctx| {
            let mr = martingale_diagnostics(&ctx, &path, n, cfg.probes.theta0)?;
            let rn = rn_ratio_diagnostic(&ctx, &path, n)?;
            Ok((mr, rn))
        });
        match attempt {
            Ok((mr, rn)) => {
                let mut r = vec![
                    num(e),
                    "ok".to_string(),
                    n.to_string(),
                    num(mr.s_n),
                    num(mr.log_r2),
                    num(mr.drift),
                ];
                r.extend(mr.martingales.iter().map(|x| num(*x)));
                r.extend(mr.phase_sums.iter().map(|x| num(*x)));
                r.extend([
                    num(mr.remainder),
                    num(mr.residual),
                    num(rn.wronskian_residual),
                ]);
                r.extend(rn.tail_oscillation.iter().map(|(_, o)| num(*o)));
                rows.push(r);
            }
            Err(
                err @ (diracloc::Error::ExcludedK { .. } | diracloc::Error::NearBandEdge { .. }),
            ) => {
                let mut r = vec![num(e), format!("refused: {err}"), n.to_string()];
                r.extend(std::iter::repeat_n("NaN".to_string(), 17));
                rows.push(r);
                refusals.push(json!({ "E": e, "reason": err.to_string() }));
            }
            Err(other) => return Err(other.into()),
        }
    }
    let headers = [
        "E",
        "status",
        "n",
        "s_n",
        "log_r2",
        "drift",
        "m1",
        "m2",
        "m3",
        "m4",
        "m5",
        "m6",
        "q1",
        "q2",
        "remainder",
        "residual",
        "wronskian",
        "osc_quarter",
        "osc_half",
        "osc_full",
    ];
    if cfg.output.format.csv() {
        out.csv("diagnostics.csv", &headers, &rows)?;
    }
    let mut r4_summary = serde_json::Value::Null;
    if cfg.probes.r4 {
        let r4 = r4_boundedness_probe(
            &params,
            &cfg.distribution,
            &cfg.energies.points(),
            n,
            cfg.seeds.replicas,
            cfg.seeds.base,
        )?;
        let r4_rows: Vec<Vec<String>> = r4
            .points
            .iter()
            .map(|p| {
                vec![
                    num(p.energy),
                    num(p.log_mean_half),
                    num(p.log_mean_full),
                    num(p.ratio),
                    num(p.ratio_lo),
                    num(p.ratio_hi),
                    opt(p.log_envelope),
                ]
            })
            .collect();
        if cfg.output.format.csv() {
            out.csv(
                "r4.csv",
                &[
                    "E",
                    "log_mean_half",
                    "log_mean_full",
                    "ratio",
                    "ratio_lo",
                    "ratio_hi",
                    "log_envelope",
                ],
                &r4_rows,
            )?;
        }
        r4_summary = json!({ "plateau": r4.plateau, "growing": r4.growing, "integral": r4.integral, "sup_log_mean": r4.sup_log_mean });
    }
    out.json(
        "diagnostics_summary.json",
        &json!({ "n": n, "refusals": refusals, "r4": r4_summary }),
    )?;
    Ok(())
}

pub fn validate_disorder(cfg: &ExperimentConfig, out: &mut Writer) -> CmdResult {
    let report = validate_assumptions(&cfg.distribution, &cfg.model, cfg.seeds.replicas)?;
    if cfg.output.format.csv() {
        let checks: Vec<Vec<String>> = report
            .checks
            .iter()
            .map(|c| {
                let passed = match c.passed {
                    Some(true) => "pass",
                    Some(false) => "fail",
                    None => "unchecked",
                };
                vec![c.name.clone(), passed.to_string(), c.detail.clone()]
            })
            .collect();
        out.csv("assumptions.csv", &["check", "result", "detail"], &checks)?;
        let sites: Vec<Vec<String>> = report
            .sites
            .iter()
            .map(|s| {
                vec![
                    s.site.to_string(),
                    s.component.to_string(),
                    num(s.scale),
                    num(s.mean),
                    num(s.mean_se),
                    num(s.variance),
                    num(s.variance_se),
                    num(s.abs_third),
                    num(s.fourth),
                ]
            })
            .collect();
        out.csv(
            "site_moments.csv",
            &[
                "site",
                "component",
                "scale",
                "mean",
                "mean_se",
                "variance",
                "variance_se",
                "abs_third",
                "fourth",
            ],
            &sites,
        )?;
    }
    out.json(
        "validate_summary.json",
        &json!({ "samples": report.samples, "all_passed": report.all_passed() }),
    )?;
    Ok(())
}

/// Energies of the grid that lie strictly inside the band.
pub fn interior_energies(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.energies
        .points()
        .into_iter()
        .filter(|&e| in_band_interior(e, cfg.model.m))
        .collect()
}
