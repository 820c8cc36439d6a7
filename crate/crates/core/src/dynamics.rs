//! Unitary time evolution through a spectral decomposition and the transport
//! diagnostics built on it.

use crate::eigen::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::model::{BoxDescriptor, Spin};
use crate::spectra::projection_blocks;
use crate::stats::ols;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Site {
        n: usize,
        spin: Spin,
    },
    /// Real amplitudes indexed like the box.
    Vector(Vec<f64>),
}

impl InitialState {
    pub fn to_vector(&self, boxd: BoxDescriptor) -> Result<Vec<f64>> {
        match self {
            InitialState::Site { n, spin } => {
                let i = boxd.index_of(*n, *spin).ok_or_else(|| {
                    Error::UnsupportedInitialState(format!(
                        "site ({n}, {}) lies outside the box",
                        spin.symbol()
                    ))
                })?;
                let mut v = vec![0.0; boxd.dim()];
                v[i] = 1.0;
                Ok(v)
            }
            InitialState::Vector(v) => {
                if v.len() != boxd.dim() {
                    return Err(Error::UnsupportedInitialState(format!(
                        "vector has {} entries but the box has dimension {}",
                        v.len(),
                        boxd.dim()
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionProbes {
    /// Powers `p` of `⟨|X|^p⟩`.
    pub moments: Vec<f64>,
    /// `(p, N)` for `⟨|X_N|^p⟩` with `X_N = X χ_{[1,N]}`.
    pub truncated: Vec<(f64, usize)>,
    /// Radii `R` for the tail mass beyond `R`.
    pub radii: Vec<usize>,
    /// Exponents `κ` of `⟨e^{2|X|^κ}⟩`, stored as logarithms.
    pub kappas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub initial_norm: f64,
    pub probes: EvolutionProbes,
    /// `moments[i][t]` for `probes.moments[i]`.
    pub moments: Vec<Vec<f64>>,
    pub truncated: Vec<Vec<f64>>,
    pub survival: Vec<Vec<f64>>,
    /// `log ⟨e^{2|X|^κ}⟩`.
    pub log_stretched: Vec<Vec<f64>>,
}

/// Complex state `(re, im)` in the box basis.
pub type State = (Vec<f64>, Vec<f64>);

fn coefficients(decomp: &SpectralDecomposition, psi: &[f64]) -> Vec<f64> {
    decomp
        .eigenvectors
        .iter()
        .map(|v| v.iter().zip(psi).map(|(a, b)| a * b).sum())
        .collect()
}

/// `e^{−itD} P ψ` where `P` projects onto the eigenvectors present.
pub fn propagate(decomp: &SpectralDecomposition, psi: &State, t: f64) -> State {
    let dim = decomp.dim();
    let mut re = vec![0.0; dim];
    let mut im = vec![0.0; dim];
    for (v, &e) in decomp.eigenvectors.iter().zip(&decomp.eigenvalues) {
        let a: f64 = v.iter().zip(&psi.0).map(|(x, y)| x * y).sum();
        let b: f64 = v.iter().zip(&psi.1).map(|(x, y)| x * y).sum();
        let (s, c) = (-e * t).sin_cos();
        let (cr, ci) = (a * c - b * s, a * s + b * c);
        for i in 0..dim {
            re[i] += cr * v[i];
            im[i] += ci * v[i];
        }
    }
    (re, im)
}

fn evolve_coeffs(decomp: &SpectralDecomposition, coeffs: &[f64], t: f64) -> State {
    let dim = decomp.dim();
    let mut re = vec![0.0; dim];
    let mut im = vec![0.0; dim];
    for ((v, &e), &c) in decomp
        .eigenvectors
        .iter()
        .zip(&decomp.eigenvalues)
        .zip(coeffs)
    {
        if c == 0.0 {
            continue;
        }
        let (s, co) = (-e * t).sin_cos();
        let (cr, ci) = (c * co, c * s);
        for i in 0..dim {
            re[i] += cr * v[i];
            im[i] += ci * v[i];
        }
    }
    (re, im)
}

/// `ρ_n = Σ_σ |ψ(n, σ)|²` for `n = 1..=l`.
pub fn site_density(state: &State, boxd: BoxDescriptor) -> Vec<f64> {
    let mut rho = vec![0.0; boxd.l];
    for i in 0..state.0.len() {
        let (n, _) = boxd.site_of(i).expect("index inside box");
        rho[n - 1] += state.0[i] * state.0[i] + state.1[i] * state.1[i];
    }
    rho
}

fn moment(rho: &[f64], p: f64, cut: usize) -> f64 {
    rho.iter()
        .take(cut)
        .enumerate()
        .map(|(i, r)| ((i + 1) as f64).powf(p) * r)
        .sum()
}

fn log_stretched(rho: &[f64], kappa: f64) -> f64 {
    let logs: Vec<f64> = rho
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(i, r)| r.ln() + 2.0 * ((i + 1) as f64).powf(kappa))
        .collect();
    let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln()
}

/// Records the probes along `times` for `ψ(t) = Σ_j e^{−iE_j t}⟨v_j, ψ₀⟩ v_j`.
/// Norm followed by the moment, truncated-moment, tail and stretched probes at one time.
type ProbeRow = (f64, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

pub fn evolve(
    decomp: &SpectralDecomposition,
    psi0: &InitialState,
    times: &[f64],
    probes: &EvolutionProbes,
) -> Result<EvolutionTrace> {
    let boxd = decomp.boxd;
    let psi = psi0.to_vector(boxd)?;
    let coeffs = coefficients(decomp, &psi);
    let initial_norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let per_time: Vec<ProbeRow> = times
        .par_iter()
        .map(|&t| {
            let st = evolve_coeffs(decomp, &coeffs, t);
            let rho = site_density(&st, boxd);
            let norm = rho.iter().sum::<f64>().sqrt();
            let mom = probes
                .moments
                .iter()
                .map(|&p| moment(&rho, p, rho.len()))
                .collect();
            let tr = probes
                .truncated
                .iter()
                .map(|&(p, n)| moment(&rho, p, n))
                .collect();
            let sv = probes
                .radii
                .iter()
                .map(|&r| rho.iter().skip(r).sum())
                .collect();
            let ls = probes
                .kappas
                .iter()
                .map(|&k| log_stretched(&rho, k))
                .collect();
            (norm, mom, tr, sv, ls)
        })
        .collect();
    let transpose = |k: usize, sel: &dyn Fn(&ProbeRow) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| per_time.iter().map(|r| sel(r)[i]).collect())
            .collect()
    };
    Ok(EvolutionTrace {
        times: times.to_vec(),
        norms: per_time.iter().map(|r| r.0).collect(),
        initial_norm,
        moments: transpose(probes.moments.len(), &|r| &r.1),
        truncated: transpose(probes.truncated.len(), &|r| &r.2),
        survival: transpose(probes.radii.len(), &|r| &r.3),
        log_stretched: transpose(probes.kappas.len(), &|r| &r.4),
        probes: probes.clone(),
    })
}

/// Horizon `10 · dim / bandwidth` with bandwidth `2√(m² + 4)`.
pub fn default_horizon(dim: usize, m: f64) -> f64 {
    10.0 * dim as f64 / (2.0 * (m * m + 4.0).sqrt())
}

/// Ten Heisenberg times `2π / Δ̄` of the eigenvalues present, with `Δ̄` the
/// mean level spacing over their range.
pub fn heisenberg_horizon(decomp: &SpectralDecomposition) -> Option<f64> {
    let k = decomp.len();
    if k < 2 {
        return None;
    }
    let spacing = (decomp.eigenvalues[k - 1] - decomp.eigenvalues[0]) / (k - 1) as f64;
    (spacing > 0.0).then(|| 20.0 * std::f64::consts::PI / spacing)
}

/// `steps + 1` equally spaced times on `[0, horizon]`.
pub fn time_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| horizon * i as f64 / steps as f64)
        .collect()
}

/// `(1/T) ∫₀ᵀ ⟨|X_N|^p⟩ dt` by the trapezoid rule, one value per `N`.
pub fn time_averaged_truncated_moment(
    decomp: &SpectralDecomposition,
    psi0: &InitialState,
    p: f64,
    n_grid: &[usize],
    horizon: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let probes = EvolutionProbes {
        truncated: n_grid.iter().map(|&n| (p, n)).collect(),
        ..Default::default()
    };
    let tr = evolve(decomp, psi0, &time_grid(horizon, steps), &probes)?;
    Ok(tr
        .truncated
        .iter()
        .map(|row| {
            let inner: f64 = row[1..row.len() - 1].iter().sum();
            (inner + 0.5 * (row[0] + row[row.len() - 1])) / steps as f64
        })
        .collect())
}

/// `lim_{T→∞}` of the time average: `Σ_E ‖|X_N|^{p/2} P_E ψ₀‖²`.
pub fn infinite_time_truncated_moment(
    decomp: &SpectralDecomposition,
    psi0: &InitialState,
    p: f64,
    n_grid: &[usize],
) -> Result<Vec<f64>> {
    let boxd = decomp.boxd;
    let psi = psi0.to_vector(boxd)?;
    let coeffs = coefficients(decomp, &psi);
    let mut out = vec![0.0; n_grid.len()];
    for b in projection_blocks(&decomp.eigenvalues) {
        let mut proj = vec![0.0; boxd.dim()];
        for j in b {
            let c = coeffs[j];
            proj.iter_mut()
                .zip(&decomp.eigenvectors[j])
                .for_each(|(x, v)| *x += c * v);
        }
        let rho = site_density(&(proj, vec![0.0; boxd.dim()]), boxd);
        for (o, &n) in out.iter_mut().zip(n_grid) {
            *o += moment(&rho, p, n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonDoubling {
    pub horizon: f64,
    pub sup_half: f64,
    pub sup_full: f64,
    /// `sup over [0, 2T] / sup over [0, T]`.
    pub ratio: f64,
}

/// `sup_t ⟨|X|^p⟩` over `[0, T]` and `[0, 2T]`.
pub fn horizon_doubling(
    decomp: &SpectralDecomposition,
    psi0: &InitialState,
    p: f64,
    horizon: f64,
    steps: usize,
) -> Result<HorizonDoubling> {
    let probes = EvolutionProbes {
        moments: vec![p],
        ..Default::default()
    };
    let tr = evolve(decomp, psi0, &time_grid(2.0 * horizon, 2 * steps), &probes)?;
    let row = &tr.moments[0];
    let sup_half = row[..=steps].iter().copied().fold(0.0, f64::max);
    let sup_full = row.iter().copied().fold(0.0, f64::max);
    Ok(HorizonDoubling {
        horizon,
        sup_half,
        sup_full,
        ratio: sup_full / sup_half,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StretchedClass {
    Bounded,
    Growing,
    BoxLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedPoint {
    pub kappa: f64,
    /// `log sup_{[0,T]} ⟨e^{2|X|^κ}⟩` in the base box.
    pub log_sup: f64,
    pub log_sup_doubled_horizon: f64,
    pub log_sup_doubled_box: f64,
    pub class: StretchedClass,
}

/// Growth factor above which a doubling trend counts as growth.
pub const DOUBLING_TOL: f64 = 1.10;

/// Stretched-exponential moments under horizon doubling and box doubling.
/// `doubled` is the decomposition of the same disorder on the box of twice
/// the size.
pub fn stretched_moment_probe(
    base: &SpectralDecomposition,
    doubled: &SpectralDecomposition,
    psi0: &InitialState,
    kappas: &[f64],
    horizon: f64,
    steps: usize,
) -> Result<Vec<StretchedPoint>> {
    let probes = EvolutionProbes {
        kappas: kappas.to_vec(),
        ..Default::default()
    };
    let a = evolve(base, psi0, &time_grid(2.0 * horizon, 2 * steps), &probes)?;
    let b = evolve(doubled, psi0, &time_grid(horizon, steps), &probes)?;
    let tol = DOUBLING_TOL.ln();
    Ok(kappas
        .iter()
        .enumerate()
        .map(|(i, &kappa)| {
            let sup = |r: &[f64]| r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sup = sup(&a.log_stretched[i][..=steps]);
            let log_sup_doubled_horizon = sup(&a.log_stretched[i]);
            let log_sup_doubled_box = sup(&b.log_stretched[i]);
            let class = if log_sup_doubled_horizon - log_sup > tol {
                StretchedClass::Growing
            } else if log_sup_doubled_box - log_sup > tol {
                StretchedClass::BoxLimited
            } else {
                StretchedClass::Bounded
            };
            StretchedPoint {
                kappa,
                log_sup,
                log_sup_doubled_horizon,
                log_sup_doubled_box,
                class,
            }
        })
        .collect())
}

/// Exponent of `⟨|X|²⟩(t) ∝ t^γ` fitted on the given times.
pub fn moment_growth_exponent(
    decomp: &SpectralDecomposition,
    psi0: &InitialState,
    times: &[f64],
) -> Result<f64> {
    let probes = EvolutionProbes {
        moments: vec![2.0],
        ..Default::default()
    };
    let tr = evolve(decomp, psi0, times, &probes)?;
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = tr.moments[0].iter().map(|m| m.ln()).collect();
    Ok(ols(&x, &y).slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{sample_path, DisorderPath, DistributionSpec};
    use crate::eigen::{diagonalize, diagonalize_window, DEFAULT_DIMENSION_CAP};
    use crate::model::{assemble_operator, Exponent, ModelParams};
    use crate::spectra::correlator;

    fn decomp(alpha: Exponent, m: f64, lambda: f64, l: usize, seed: u64) -> SpectralDecomposition {
        let p = ModelParams::new(m, lambda, alpha).unwrap();
        let path = sample_path(&p, &DistributionSpec::default(), l, seed);
        diagonalize(&assemble_operator(&p, &path, BoxDescriptor::lambda(l)).unwrap()).unwrap()
    }

    const START: InitialState = InitialState::Site {
        n: 1,
        spin: Spin::Minus,
    };

    #[test]
    fn unitary_and_reversible() {
        let d = decomp(Exponent::value(0.3).unwrap(), 0.0, 1.0, 80, 2);
        let probes = EvolutionProbes {
            moments: vec![2.0],
            truncated: vec![(2.0, 10), (2.0, 40), (2.0, 80)],
            radii: vec![5],
            kappas: vec![0.0],
        };
        let tr = evolve(&d, &START, &time_grid(300.0, 60), &probes).unwrap();
        assert!((tr.initial_norm - 1.0).abs() < 1e-10);
        assert!(tr.norms.iter().all(|n| (n - 1.0).abs() < 1e-10));
        for t in 0..tr.times.len() {
            assert!(
                tr.truncated[0][t] <= tr.truncated[1][t]
                    && tr.truncated[1][t] <= tr.truncated[2][t] + 1e-12
            );
            assert!((tr.truncated[2][t] - tr.moments[0][t]).abs() < 1e-9 * tr.moments[0][t]);
            assert!((tr.log_stretched[0][t] - 2.0).abs() < 1e-10);
        }
        let psi = (START.to_vector(d.boxd).unwrap(), vec![0.0; d.dim()]);
        let fwd = propagate(&d, &psi, 123.4);
        let back = propagate(&d, &fwd, -123.4);
        for i in 0..d.dim() {
            assert!((back.0[i] - psi.0[i]).abs() < 1e-9 && back.1[i].abs() < 1e-9);
        }
    }

    #[test]
    fn heisenberg_time_of_free_box() {
        let d = decomp(Exponent::HALF, 0.0, 0.0, 50, 0);
        let h = heisenberg_horizon(&d).unwrap();
        let span = d.eigenvalues[d.len() - 1] - d.eigenvalues[0];
        assert!((h - 20.0 * std::f64::consts::PI * (d.len() - 1) as f64 / span).abs() < 1e-9);
    }

    #[test]
    fn rejects_states_outside_box() {
        let d = decomp(Exponent::HALF, 0.0, 0.0, 10, 0);
        let bad = InitialState::Site {
            n: 11,
            spin: Spin::Minus,
        };
        assert!(matches!(
            evolve(&d, &bad, &[0.0], &EvolutionProbes::default()),
            Err(Error::UnsupportedInitialState(_))
        ));
        let short = InitialState::Vector(vec![1.0; 3]);
        assert!(matches!(
            evolve(&d, &short, &[0.0], &EvolutionProbes::default()),
            Err(Error::UnsupportedInitialState(_))
        ));
    }

    #[test]
    fn rage_tail_bounded_by_correlators() {
        let p = ModelParams::new(0.0, 1.0, Exponent::value(0.3).unwrap()).unwrap();
        let path = sample_path(&p, &DistributionSpec::default(), 120, 5);
        let op = assemble_operator(&p, &path, BoxDescriptor::lambda(120)).unwrap();
        let w = diagonalize_window(&op, 0.7, 1.3, DEFAULT_DIMENSION_CAP).unwrap();
        let q = correlator(&w, 1, Spin::Minus, (0.7, 1.3), 1.0).unwrap();
        for r in [2usize, 10, 30, 60] {
            let bound: f64 = q
                .entries
                .iter()
                .filter(|e| e.n > r)
                .map(|e| e.q * e.q)
                .sum();
            let tr = evolve(
                &w,
                &START,
                &time_grid(500.0, 50),
                &EvolutionProbes {
                    radii: vec![r],
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(tr.survival[0]
                .iter()
                .all(|&s| s <= bound * (1.0 + 1e-9) + 1e-15));
        }
    }

    #[test]
    fn time_average_approaches_spectral_limit() {
        let d = decomp(Exponent::value(0.3).unwrap(), 0.0, 1.0, 40, 8);
        let grid = [5, 10, 20, 40];
        let lim = infinite_time_truncated_moment(&d, &START, 2.0, &grid).unwrap();
        let avg = time_averaged_truncated_moment(&d, &START, 2.0, &grid, 4000.0, 8000).unwrap();
        for (a, b) in avg.iter().zip(&lim) {
            assert!((a - b).abs() < 0.05 * b, "{a} {b}");
        }
    }

    #[test]
    fn free_evolution_is_ballistic() {
        let p = ModelParams::new(0.0, 0.0, Exponent::HALF).unwrap();
        let op =
            assemble_operator(&p, &DisorderPath::free(p, 600), BoxDescriptor::lambda(600)).unwrap();
        let d = diagonalize(&op).unwrap();
        let times: Vec<f64> = (1..=10).map(|i| 30.0 * i as f64).collect();
        let g = moment_growth_exponent(&d, &START, &times).unwrap();
        assert!((g - 2.0).abs() < 0.1, "{g}");
    }

    #[test]
    fn stretched_probe_classes() {
        let a = Exponent::value(0.3).unwrap();
        let base = decomp(a, 0.0, 1.0, 150, 4);
        let doubled = decomp(a, 0.0, 1.0, 300, 4);
        let pts =
            stretched_moment_probe(&base, &doubled, &START, &[0.0, 0.2, 0.6], 400.0, 200).unwrap();
        assert_eq!(pts[0].class, StretchedClass::Bounded);
        assert!((pts[0].log_sup - 2.0).abs() < 1e-9);
        assert_eq!(pts[1].class, StretchedClass::Bounded);
        assert_ne!(pts[2].class, StretchedClass::Bounded);
    }
}
