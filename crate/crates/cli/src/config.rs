//! Experiment configuration: a JSON document validated before any work
//! starts.

use diracloc::disorder::DistributionSpec;
use diracloc::model::ModelParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line in the config text, when it can be located.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Either explicit `values` or `count` points from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, count: usize) -> Self {
        Grid {
            values: Vec::new(),
            start: Some(start),
            stop: Some(stop),
            count: Some(count),
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if !self.values.is_empty() {
            return self.values.clone();
        }
        match (self.start, self.stop, self.count) {
            (Some(a), _, Some(1)) => vec![a],
            (Some(a), Some(b), Some(c)) => (0..c)
                .map(|i| a + (b - a) * i as f64 / (c - 1) as f64)
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    /// Path length for transfer-matrix and Prüfer runs.
    pub n: usize,
    /// Box size.
    pub l: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes { n: 100_000, l: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub base: u64,
    pub replicas: usize,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            base: 1,
            replicas: 100,
        }
    }
}

fn default_s() -> f64 {
    0.1
}
fn default_s_negative() -> f64 {
    0.05
}
fn default_u() -> usize {
    1
}
fn default_n_grid() -> Vec<usize> {
    (1..=10).map(|i| 40 * i).collect()
}
fn default_window() -> [f64; 2] {
    [0.8, 1.2]
}
fn default_moments() -> Vec<f64> {
    vec![2.0]
}
fn default_radii() -> Vec<usize> {
    vec![10, 50]
}
fn default_truncated_power() -> f64 {
    6.0
}
fn default_truncated_grid() -> Vec<usize> {
    vec![25, 50, 100, 200, 400]
}
fn default_steps() -> usize {
    400
}
fn default_lambdas() -> Grid {
    Grid::linspace(0.0, 2.0, 41)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probes {
    /// Fractional power for Green's function moments.
    #[serde(default = "default_s")]
    pub s: f64,
    /// Power for negative moments of transfer products.
    #[serde(default = "default_s_negative")]
    pub s_negative: f64,
    /// Source site.
    #[serde(default = "default_u")]
    pub u: usize,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default = "default_n_grid")]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_moments")]
    pub moments: Vec<f64>,
    #[serde(default = "default_radii")]
    pub radii: Vec<usize>,
    #[serde(default)]
    pub kappas: Vec<f64>,
    #[serde(default = "default_truncated_power")]
    pub truncated_power: f64,
    #[serde(default = "default_truncated_grid")]
    pub truncated_grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_lambdas")]
    pub lambdas: Grid,
    /// Run the fourth-moment probe in `diagnostics`.
    #[serde(default)]
    pub r4: bool,
}

impl Default for Probes {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all probe fields have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Svg,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: default_dir(),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub distribution: DistributionSpec,
    pub energies: Grid,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub probes: Probes,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    /// `m = 0, λ = 0.3, α = 1/2` with 20 energies from 0.05 to 1.855.
    fn default() -> Self {
        ExperimentConfig {
            model: ModelParams::new(0.0, 0.3, diracloc::model::Exponent::HALF)
                .expect("valid defaults"),
            distribution: DistributionSpec::default(),
            energies: Grid::linspace(0.05, 1.855, 20),
            sizes: Sizes::default(),
            seeds: Seeds::default(),
            probes: Probes::default(),
            output: OutputSpec::default(),
        }
    }
}

/// Line of the first occurrence of `"key"` in `text`.
fn locate(text: &str, key: &str) -> Option<usize> {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map(|i| i + 1)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        cfg.validate_against(text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_against(&self.to_text())
    }

    fn validate_against(&self, text: &str) -> Result<(), ConfigError> {
        let err = |key: &str, message: String| ConfigError {
            line: locate(text, key),
            message,
        };
        self.model
            .validate()
            .map_err(|e| err("model", e.to_string()))?;
        let e = self.energies.points();
        if e.is_empty() {
            return Err(err("energies", "energy grid is empty".into()));
        }
        if e.iter().any(|x| !x.is_finite()) {
            return Err(err(
                "energies",
                "energy grid contains a non-finite value".into(),
            ));
        }
        if self.sizes.n == 0 {
            return Err(err("n", "path length n must be positive".into()));
        }
        if self.sizes.l < 2 {
            return Err(err("l", "box size l must be at least 2".into()));
        }
        if self.seeds.replicas < 2 {
            return Err(err("replicas", "need at least two replicas".into()));
        }
        let p = &self.probes;
        if !(p.s > 0.0 && p.s <= 0.5) {
            return Err(err(
                "s",
                format!("fractional power must lie in (0, 1/2], got {}", p.s),
            ));
        }
        if !(p.s_negative > 0.0 && p.s_negative.is_finite()) {
            return Err(err(
                "s_negative",
                format!(
                    "negative-moment power must be positive, got {}",
                    p.s_negative
                ),
            ));
        }
        if p.window.iter().any(|x| x.is_nan()) || p.window[0] >= p.window[1] {
            return Err(err("window", "window must satisfy lo < hi".into()));
        }
        if p.u == 0 {
            return Err(err("u", "source site must be at least 1".into()));
        }
        if p.n_grid.contains(&0) {
            return Err(err("n_grid", "grid sites must be at least 1".into()));
        }
        if p.steps == 0 {
            return Err(err("steps", "need at least one time step".into()));
        }
        if let Some(h) = p.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(err("horizon", "horizon must be positive".into()));
            }
        }
        if p.lambdas
            .points()
            .iter()
            .any(|l| !(l.is_finite() && *l >= 0.0))
        {
            return Err(err(
                "lambdas",
                "coupling grid must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    /// The output directory does not enter the hash.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = PathBuf::new();
        let digest = Sha256::digest(
            serde_json::to_string(&canonical)
                .expect("config serializes")
                .as_bytes(),
        );
        format!("{digest:x}")[..16].to_string()
    }
}
