//! Critical coupling, critical energies and the spectral classifier.
//!
//! Everything is expressed through `w = E² + m²`, in which the threshold
//! `F(E) = ½(E²−m²)(m²+4−E²)/(m²+E²)` becomes `(w−A)(B−w)/(2w)` with
//! `A = 2m²` and `B = 2m² + 4`.

use crate::error::{Error, Result};
use crate::model::{energy_context, AlphaClass, ModelParams, SpectralWindow};
use serde::{Deserialize, Serialize};

/// `F(E) = λ_m(E)²`, the squared critical coupling at energy `|E|`.
pub fn threshold_sq(energy: f64, m: f64) -> f64 {
    let e2 = energy * energy;
    let m2 = m * m;
    0.5 * (e2 - m2) * (m2 + 4.0 - e2) / (m2 + e2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub lambda_star: f64,
    pub energy_star: f64,
}

/// Maximum `λ*(m)` of `√F` over the positive band and its location.
/// Defined for `m > 0`; at `m = 0` the supremum `√2` is approached only at
/// the band edge `E → 0`.
pub fn lambda_critical(m: f64) -> Result<CriticalPoint> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "critical coupling needs m > 0 (got {m}); for m = 0 the supremum sqrt(2) sits at the band edge"
        )));
    }
    let s = (m * m + 2.0).sqrt();
    Ok(CriticalPoint {
        lambda_star: s - m,
        energy_star: (m * (2.0 * s - m)).sqrt(),
    })
}

/// Two solutions `E*₋ < E*₊` of `F(E) = λ²` in the positive band, or `None`
/// when `λ ≥ λ*(m)`. For `m = 0` the lower root is the band edge `0`.
pub fn critical_energies(lambda: f64, m: f64) -> Option<(f64, f64)> {
    if !(m.is_finite() && m >= 0.0 && lambda.is_finite()) {
        return None;
    }
    let lam = lambda.abs();
    let lambda_star = if m > 0.0 {
        (m * m + 2.0).sqrt() - m
    } else {
        2f64.sqrt()
    };
    if lam >= lambda_star {
        return None;
    }
    let a = 2.0 * m * m;
    let b = 2.0 * m * m + 4.0;
    let sum = a + b - 2.0 * lam * lam;
    let disc = sum * sum - 4.0 * a * b;
    if disc <= 0.0 {
        return None;
    }
    let w_hi = 0.5 * (sum + disc.sqrt());
    let w_lo = a * b / w_hi;
    let e_lo = (w_lo - m * m).max(0.0).sqrt();
    let e_hi = (w_hi - m * m).sqrt();
    Some((e_lo, e_hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralType {
    Ac,
    Pp,
    Sc,
    OutsideBand,
}

impl SpectralType {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralType::Ac => "ac",
            SpectralType::Pp => "pp",
            SpectralType::Sc => "sc",
            SpectralType::OutsideBand => "outside_band",
        }
    }
}

impl AlphaClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlphaClass::Supercritical => "supercritical",
            AlphaClass::Critical => "critical",
            AlphaClass::Subcritical => "subcritical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub energy: f64,
    pub alpha_class: AlphaClass,
    pub spectral_type: SpectralType,
    pub lambda_star: Option<f64>,
    pub energy_star: Option<f64>,
    pub critical_energies: Option<(f64, f64)>,
    /// Lyapunov exponent at `|E|` when `E` is in the band interior.
    pub beta: Option<f64>,
}

/// Spectral type of the model at energy `E`. At `α = ½` the endpoints
/// `|E| = E*±` and the coupling `λ = λ*(m)` belong to the pure point part.
/// Without disorder the operator is free and the band is absolutely continuous.
pub fn classify(params: &ModelParams, energy: f64) -> RegimeReport {
    let m = params.m;
    let lam = params.lambda.abs();
    let alpha_class = params.alpha_class();
    let cp = lambda_critical(m).ok();
    let crit = critical_energies(lam, m);
    let in_band = SpectralWindow::new(m)
        .map(|w| w.contains(energy))
        .unwrap_or(false);
    let beta = if in_band {
        energy_context(energy.abs(), m)
            .ok()
            .filter(|c| !c.near_edge)
            .map(|c| crate::lyapunov::beta_value(&c, lam))
    } else {
        None
    };
    let spectral_type = if !in_band {
        SpectralType::OutsideBand
    } else if lam == 0.0 {
        SpectralType::Ac
    } else {
        match alpha_class {
            AlphaClass::Supercritical => SpectralType::Ac,
            AlphaClass::Subcritical => SpectralType::Pp,
            AlphaClass::Critical => match crit {
                Some((lo, hi)) if energy.abs() > lo && energy.abs() < hi => SpectralType::Sc,
                _ => SpectralType::Pp,
            },
        }
    };
    RegimeReport {
        energy,
        alpha_class,
        spectral_type,
        lambda_star: cp.map(|c| c.lambda_star),
        energy_star: cp.map(|c| c.energy_star),
        critical_energies: crit,
        beta,
    }
}
