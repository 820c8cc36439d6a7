//! Model parameters, energy bookkeeping and the interleaved box operator.

use crate::disorder::DisorderPath;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Guard on `sin 2k` below which analytic quantities are refused.
pub const BAND_EDGE_GUARD: f64 = 1e-6;

/// Decay exponent `α`, kept as an exact rational when given as one so that
/// `α = 1/2` is recognized without floating comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentRepr", into = "ExponentRepr")]
pub enum Exponent {
    Ratio { num: u32, den: u32 },
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<ExponentRepr> for Exponent {
    type Error = String;
    fn try_from(r: ExponentRepr) -> std::result::Result<Self, String> {
        match r {
            ExponentRepr::Number(x) => Exponent::value(x).map_err(|e| e.to_string()),
            ExponentRepr::Text(s) => s.parse::<Exponent>().map_err(|e| e.to_string()),
        }
    }
}

impl From<Exponent> for ExponentRepr {
    fn from(e: Exponent) -> Self {
        match e {
            Exponent::Ratio { .. } => ExponentRepr::Text(e.to_string()),
            Exponent::Value(x) => ExponentRepr::Number(x),
        }
    }
}

impl Exponent {
    pub const HALF: Exponent = Exponent::Ratio { num: 1, den: 2 };

    pub fn value(x: f64) -> Result<Self> {
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {x}"
            )));
        }
        Ok(Exponent::Value(x))
    }

    pub fn ratio(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {num}/{den}"
            )));
        }
        Ok(Exponent::Ratio { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Exponent::Ratio { num, den } => num as f64 / den as f64,
            Exponent::Value(x) => x,
        }
    }

    /// Classification relative to the critical value `1/2`. A float equal
    /// to `0.5` counts as critical.
    pub fn class(&self) -> AlphaClass {
        let ord = match *self {
            Exponent::Ratio { num, den } => (2 * num as u64).cmp(&(den as u64)),
            Exponent::Value(x) => x.partial_cmp(&0.5).unwrap_or(std::cmp::Ordering::Equal),
        };
        match ord {
            std::cmp::Ordering::Greater => AlphaClass::Supercritical,
            std::cmp::Ordering::Equal => AlphaClass::Critical,
            std::cmp::Ordering::Less => AlphaClass::Subcritical,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Ratio { num, den } => write!(f, "{num}/{den}"),
            Exponent::Value(x) => write!(f, "{x}"),
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse::<u32>();
            let den = b.trim().parse::<u32>();
            match (num, den) {
                (Ok(n), Ok(d)) => Exponent::ratio(n, d),
                _ => Err(Error::InvalidParameter(format!(
                    "cannot parse exponent '{s}'"
                ))),
            }
        } else {
            let x = s
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse exponent '{s}'")))?;
            Exponent::value(x)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaClass {
    Supercritical,
    Critical,
    Subcritical,
}

/// Envelope `a_n` with `n^α a_n → 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `a_n = n^{-α}`.
    #[default]
    PowerLaw,
    /// `a_n = (n + offset)^{-α}`.
    Shifted { offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub m: f64,
    pub lambda: f64,
    pub alpha: Exponent,
    #[serde(default)]
    pub envelope: Envelope,
}

impl ModelParams {
    pub fn new(m: f64, lambda: f64, alpha: Exponent) -> Result<Self> {
        let p = ModelParams {
            m,
            lambda,
            alpha,
            envelope: Envelope::PowerLaw,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_envelope(mut self, envelope: Envelope) -> Result<Self> {
        self.envelope = envelope;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass must be >= 0, got {}",
                self.m
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        let a = self.alpha.as_f64();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {a}"
            )));
        }
        if let Envelope::Shifted { offset } = self.envelope {
            if !(offset.is_finite() && offset > -1.0) {
                return Err(Error::InvalidParameter(format!(
                    "envelope offset must exceed -1, got {offset}"
                )));
            }
        }
        Ok(())
    }

    pub fn alpha_class(&self) -> AlphaClass {
        self.alpha.class()
    }

    /// Envelope value `a_n` for `n ≥ 1`.
    pub fn envelope_at(&self, n: usize) -> f64 {
        let a = self.alpha.as_f64();
        let x = match self.envelope {
            Envelope::PowerLaw => n as f64,
            Envelope::Shifted { offset } => n as f64 + offset,
        };
        if let Exponent::Ratio { num: 1, den: 2 } = self.alpha {
            return 1.0 / x.sqrt();
        }
        x.powf(-a)
    }

    /// Standard deviation `λ a_n` of the potential at site `n`.
    pub fn scale_at(&self, n: usize) -> f64 {
        self.lambda * self.envelope_at(n)
    }
}

/// Energy-dependent constants of the free problem on the positive band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyContext {
    pub energy: f64,
    pub m: f64,
    pub p1: f64,
    pub p2: f64,
    /// Quasi-momentum in `(−π, −π/2)`.
    pub k: f64,
    pub cos_k: f64,
    pub sin_k: f64,
    pub sin_2k: f64,
    pub near_edge: bool,
}

impl EnergyContext {
    pub fn new(energy: f64, m: f64) -> Result<Self> {
        let window = SpectralWindow::new(m)?;
        if !(energy > window.lower && energy < window.upper) {
            return Err(Error::EnergyOutOfBand {
                energy,
                lower: window.lower,
                upper: window.upper,
            });
        }
        let p1 = m - energy;
        let p2 = m + energy;
        let e2m2 = (energy - m) * (energy + m);
        let top = (m * m + 4.0 - energy * energy).max(0.0);
        let cos_k = -0.5 * e2m2.sqrt();
        let sin_k = -0.5 * top.sqrt();
        let k = sin_k.atan2(cos_k);
        let sin_2k = 0.5 * (e2m2 * top).sqrt();
        Ok(EnergyContext {
            energy,
            m,
            p1,
            p2,
            k,
            cos_k,
            sin_k,
            sin_2k,
            near_edge: sin_2k < BAND_EDGE_GUARD,
        })
    }

    /// Fails with `NearBandEdge` when analytic formulas are ill-conditioned.
    pub fn require_analytic(&self) -> Result<()> {
        if self.near_edge {
            Err(Error::NearBandEdge {
                energy: self.energy,
                sin2k: self.sin_2k,
            })
        } else {
            Ok(())
        }
    }
}

pub fn energy_context(energy: f64, m: f64) -> Result<EnergyContext> {
    EnergyContext::new(energy, m)
}

/// Positive and negative bands `±[m, √(m²+4)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub m: f64,
    pub lower: f64,
    pub upper: f64,
}

impl SpectralWindow {
    pub fn new(m: f64) -> Result<Self> {
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mass must be >= 0, got {m}"
            )));
        }
        Ok(SpectralWindow {
            m,
            lower: m,
            upper: (m * m + 4.0).sqrt(),
        })
    }

    /// Strict interior of `Σ`, either sign.
    pub fn contains(&self, energy: f64) -> bool {
        let e = energy.abs();
        e > self.lower && e < self.upper
    }
}

pub fn in_band_interior(energy: f64, m: f64) -> bool {
    SpectralWindow::new(m)
        .map(|w| w.contains(energy))
        .unwrap_or(false)
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub fn symbol(&self) -> char {
        match self {
            Spin::Plus => '+',
            Spin::Minus => '-',
        }
    }
}

impl std::str::FromStr for Spin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" => Ok(Spin::Plus),
            "-" | "minus" => Ok(Spin::Minus),
            _ => Err(Error::InvalidParameter(format!("unknown spin '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxKind {
    /// `δ⁻_1, δ⁺_1, …, δ⁺_{l−1}, δ⁻_l`, dimension `2l − 1`.
    Lambda,
    /// `δ⁻_1, δ⁺_1, …, δ⁻_l, δ⁺_l`, dimension `2l`.
    LambdaPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDescriptor {
    pub kind: BoxKind,
    pub l: usize,
}

impl BoxDescriptor {
    pub fn lambda(l: usize) -> Self {
        BoxDescriptor {
            kind: BoxKind::Lambda,
            l,
        }
    }

    pub fn lambda_prime(l: usize) -> Self {
        BoxDescriptor {
            kind: BoxKind::LambdaPrime,
            l,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BoxKind::Lambda => (2 * self.l).saturating_sub(1),
            BoxKind::LambdaPrime => 2 * self.l,
        }
    }

    /// Interleaved index of `δ^σ_n`, if it lies in the box.
    pub fn index_of(&self, n: usize, spin: Spin) -> Option<usize> {
        if n == 0 || n > self.l {
            return None;
        }
        let i = match spin {
            Spin::Minus => 2 * (n - 1),
            Spin::Plus => 2 * (n - 1) + 1,
        };
        (i < self.dim()).then_some(i)
    }

    pub fn site_of(&self, index: usize) -> Option<(usize, Spin)> {
        if index >= self.dim() {
            return None;
        }
        let spin = if index.is_multiple_of(2) {
            Spin::Minus
        } else {
            Spin::Plus
        };
        Some((index / 2 + 1, spin))
    }

    /// Largest site index present in the box.
    pub fn last_site(&self) -> usize {
        self.l
    }
}

/// Real symmetric tridiagonal restriction of the Dirac operator to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub boxd: BoxDescriptor,
}

impl TridiagonalOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Gershgorin bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut r = self.diag[i].abs();
                if i > 0 {
                    r += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    r += self.off[i].abs();
                }
                r
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
            if i + 1 < n {
                a[i][i + 1] = self.off[i];
                a[i + 1][i] = self.off[i];
            }
        }
        a
    }
}

/// Interleaved tridiagonal matrix of `D + V` restricted to `boxd`.
pub fn assemble_operator(
    params: &ModelParams,
    path: &DisorderPath,
    boxd: BoxDescriptor,
) -> Result<TridiagonalOperator> {
    if boxd.l == 0 {
        return Err(Error::InvalidParameter(
            "box size must be at least 1".into(),
        ));
    }
    if path.len() < boxd.l {
        return Err(Error::PathTooShort {
            required: boxd.l,
            available: path.len(),
        });
    }
    let dim = boxd.dim();
    let m = params.m;
    let mut diag = Vec::with_capacity(dim);
    let mut off = Vec::with_capacity(dim.saturating_sub(1));
    for i in 0..dim {
        let n = i / 2 + 1;
        if i % 2 == 0 {
            diag.push(-m + path.v2(n));
        } else {
            diag.push(m + path.v1(n));
        }
        if i + 1 < dim {
            off.push(if i % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    Ok(TridiagonalOperator { diag, off, boxd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn energy_context_reference_point() {
        let c = energy_context(1.0, 0.0).unwrap();
        assert!((c.k + 2.0 * PI / 3.0).abs() < 1e-14);
        assert!((c.sin_2k - 3f64.sqrt() / 2.0).abs() < 1e-14);
        assert!((c.cos_k + 0.5).abs() < 1e-15);
    }

    #[test]
    fn energy_outside_band_rejected() {
        assert!(matches!(
            energy_context(0.5, 1.0),
            Err(Error::EnergyOutOfBand { .. })
        ));
        assert!(matches!(
            energy_context(2.5, 1.0),
            Err(Error::EnergyOutOfBand { .. })
        ));
        assert!(matches!(
            energy_context(-1.2, 1.0),
            Err(Error::EnergyOutOfBand { .. })
        ));
        assert!(matches!(
            energy_context(1.0, 1.0),
            Err(Error::EnergyOutOfBand { .. })
        ));
    }

    #[test]
    fn near_edge_flagged() {
        let c = energy_context(1.0 + 1e-13, 1.0).unwrap();
        assert!(c.near_edge);
        assert!(matches!(
            c.require_analytic(),
            Err(Error::NearBandEdge { .. })
        ));
    }

    #[test]
    fn exponent_half_is_exact() {
        assert_eq!(
            "1/2".parse::<Exponent>().unwrap().class(),
            AlphaClass::Critical
        );
        assert_eq!(
            "2/4".parse::<Exponent>().unwrap().class(),
            AlphaClass::Critical
        );
        assert_eq!(Exponent::value(0.5).unwrap().class(), AlphaClass::Critical);
        assert_eq!(
            "0.3".parse::<Exponent>().unwrap().class(),
            AlphaClass::Subcritical
        );
        assert_eq!(
            "3/5".parse::<Exponent>().unwrap().class(),
            AlphaClass::Supercritical
        );
        assert!("0".parse::<Exponent>().is_err());
    }

    #[test]
    fn params_round_trip_json() {
        for alpha in [
            Exponent::HALF,
            Exponent::value(0.3).unwrap(),
            Exponent::value(0.1 + 0.2).unwrap(),
        ] {
            let p = ModelParams::new(0.7, 0.25, alpha).unwrap();
            let s = serde_json::to_string(&p).unwrap();
            let q: ModelParams = serde_json::from_str(&s).unwrap();
            assert_eq!(p, q);
            assert_eq!(p.alpha.as_f64().to_bits(), q.alpha.as_f64().to_bits());
        }
        let q: ModelParams = serde_json::from_str(r#"{"m":1,"lambda":0.5,"alpha":"1/2"}"#).unwrap();
        assert_eq!(q.alpha_class(), AlphaClass::Critical);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(-1.0, 1.0, Exponent::HALF).is_err());
        assert!(ModelParams::new(1.0, -1.0, Exponent::HALF).is_err());
        assert!(ModelParams::new(1.0, f64::NAN, Exponent::HALF).is_err());
    }

    #[test]
    fn box_indexing() {
        let b = BoxDescriptor::lambda(3);
        assert_eq!(b.dim(), 5);
        assert_eq!(b.index_of(1, Spin::Minus), Some(0));
        assert_eq!(b.index_of(1, Spin::Plus), Some(1));
        assert_eq!(b.index_of(3, Spin::Minus), Some(4));
        assert_eq!(b.index_of(3, Spin::Plus), None);
        let bp = BoxDescriptor::lambda_prime(3);
        assert_eq!(bp.dim(), 6);
        assert_eq!(bp.index_of(3, Spin::Plus), Some(5));
        for i in 0..bp.dim() {
            let (n, s) = bp.site_of(i).unwrap();
            assert_eq!(bp.index_of(n, s), Some(i));
        }
    }

    proptest! {
        #[test]
        fn quasimomentum_identities(m in 0.0f64..3.0, t in 0.001f64..0.999) {
            let w = SpectralWindow::new(m).unwrap();
            let e = w.lower + t * (w.upper - w.lower);
            let c = energy_context(e, m).unwrap();
            prop_assert!(c.k > -PI && c.k < -PI / 2.0);
            prop_assert!((e * e - (m * m + 4.0 * c.cos_k * c.cos_k)).abs() < 1e-12 * (1.0 + e * e));
            let s2 = 0.5 * ((e * e - m * m) * (m * m + 4.0 - e * e)).sqrt();
            prop_assert!((c.sin_2k - s2).abs() < 1e-12);
            prop_assert!(((2.0 * c.k).sin() - c.sin_2k).abs() < 1e-9);
            prop_assert!((c.k.cos() - c.cos_k).abs() < 1e-12);
            prop_assert!((4.0 * c.cos_k * c.cos_k + c.p1 * c.p2).abs() < 1e-12 * (1.0 + e * e));
        }
    }
}
