//! Decaying random potentials `V_i(n) = λ a_n ω_{n,i}` with counter-based
//! reproducible sampling.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Standardized single-site law (mean 0, variance 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistributionFamily {
    #[default]
    Gaussian,
    Uniform,
    Rademacher,
    /// Student t with four degrees of freedom, rescaled to unit variance.
    /// Its fourth moment is infinite.
    StudentLike,
}

impl std::str::FromStr for DistributionFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(DistributionFamily::Gaussian),
            "uniform" => Ok(DistributionFamily::Uniform),
            "rademacher" | "sign" => Ok(DistributionFamily::Rademacher),
            "student_like" | "student" | "student-like" => Ok(DistributionFamily::StudentLike),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution family '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DistributionSpec {
    pub family: DistributionFamily,
}

impl DistributionSpec {
    pub fn new(family: DistributionFamily) -> Self {
        DistributionSpec { family }
    }

    /// `E|ω|^r` for `r ∈ {1, 2, 3, 4}`; `None` if infinite.
    pub fn abs_moment(&self, r: u32) -> Option<f64> {
        let sqrt_2_pi = (2.0 / PI).sqrt();
        let v = match (self.family, r) {
            (_, 2) => 1.0,
            (DistributionFamily::Gaussian, 1) => sqrt_2_pi,
            (DistributionFamily::Gaussian, 3) => 2.0 * sqrt_2_pi,
            (DistributionFamily::Gaussian, 4) => 3.0,
            (DistributionFamily::Uniform, 1) => 3f64.sqrt() / 2.0,
            (DistributionFamily::Uniform, 3) => 3.0 * 3f64.sqrt() / 4.0,
            (DistributionFamily::Uniform, 4) => 9.0 / 5.0,
            (DistributionFamily::Rademacher, _) => 1.0,
            (DistributionFamily::StudentLike, 1) => 1.0 / 2f64.sqrt(),
            (DistributionFamily::StudentLike, 3) => 2.0 * 2f64.sqrt(),
            (DistributionFamily::StudentLike, 4) => return None,
            _ => return None,
        };
        Some(v)
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.family, DistributionFamily::Rademacher)
    }

    /// Maps two raw 64-bit words to one standardized draw.
    pub fn transform(&self, w1: u64, w2: u64) -> f64 {
        match self.family {
            DistributionFamily::Gaussian => {
                let u1 = open_unit(w1);
                let u2 = open_unit(w2);
                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            }
            DistributionFamily::Uniform => 3f64.sqrt() * (2.0 * open_unit(w1) - 1.0),
            DistributionFamily::Rademacher => {
                if w1 >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            DistributionFamily::StudentLike => student4_quantile(open_unit(w1)) / 2f64.sqrt(),
        }
    }
}

fn open_unit(w: u64) -> f64 {
    ((w >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Inverse CDF of Student's t with four degrees of freedom.
pub fn student4_quantile(p: f64) -> f64 {
    let a = 4.0 * p * (1.0 - p);
    let sa = a.sqrt();
    let q = ((sa.acos()) / 3.0).cos() / sa;
    let t = 2.0 * (q - 1.0).max(0.0).sqrt();
    if p < 0.5 {
        -t
    } else {
        t
    }
}

const WORDS_PER_DRAW: u128 = 4;

fn stream(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Standardized draw `ω_{n,i}` addressed directly by its coordinates.
pub fn draw(spec: &DistributionSpec, seed: u64, replica: u64, n: usize, component: u8) -> f64 {
    assert!(n >= 1 && (component == 1 || component == 2));
    let mut rng = stream(seed, replica);
    let index = 2 * (n as u128 - 1) + (component as u128 - 1);
    rng.set_word_pos(index * WORDS_PER_DRAW);
    let w1 = rng.next_u64();
    let w2 = rng.next_u64();
    spec.transform(w1, w2)
}

/// One realization of the potential on sites `1..=len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderPath {
    pub params: ModelParams,
    pub spec: DistributionSpec,
    pub seed: Option<u64>,
    pub replica: u64,
    v1: Vec<f64>,
    v2: Vec<f64>,
}

impl DisorderPath {
    pub fn from_values(params: ModelParams, v1: Vec<f64>, v2: Vec<f64>) -> Result<Self> {
        if v1.len() != v2.len() {
            return Err(Error::InvalidParameter(
                "v1 and v2 must have equal length".into(),
            ));
        }
        if v1.iter().chain(&v2).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "potential values must be finite".into(),
            ));
        }
        Ok(DisorderPath {
            params,
            spec: DistributionSpec::default(),
            seed: None,
            replica: 0,
            v1,
            v2,
        })
    }

    /// Zero potential of the given length.
    pub fn free(params: ModelParams, len: usize) -> Self {
        DisorderPath {
            params,
            spec: DistributionSpec::default(),
            seed: None,
            replica: 0,
            v1: vec![0.0; len],
            v2: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.v1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty()
    }

    /// `V_1(n)`, `1 ≤ n ≤ len`.
    #[inline]
    pub fn v1(&self, n: usize) -> f64 {
        self.v1[n - 1]
    }

    /// `V_2(n)`, `1 ≤ n ≤ len`.
    #[inline]
    pub fn v2(&self, n: usize) -> f64 {
        self.v2[n - 1]
    }

    pub fn v1_slice(&self) -> &[f64] {
        &self.v1
    }

    pub fn v2_slice(&self) -> &[f64] {
        &self.v2
    }

    pub fn require(&self, n: usize) -> Result<()> {
        if n > self.len() {
            Err(Error::PathTooShort {
                required: n,
                available: self.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = PathMeta {
            params: self.params,
            spec: self.spec,
            seed: self.seed,
            replica: self.replica,
        };
        let line = meta_line(&meta);
        writeln!(w, "# {line}")?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "v1", "v2"])?;
        for i in 0..self.len() {
            wr.write_record([
                (i + 1).to_string(),
                self.v1[i].to_string(),
                self.v2[i].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .map(str::trim)
            .ok_or_else(|| Error::Io("missing path metadata line".into()))?;
        let meta = parse_meta(meta)?;
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut v1 = Vec::new();
        let mut v2 = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec.get(j)
                    .ok_or_else(|| Error::Io(format!("row {} too short", i + 1)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {}: {e}", i + 1)))
            };
            let n = parse(0)? as usize;
            if n != i + 1 {
                return Err(Error::Io(format!("expected site {} got {n}", i + 1)));
            }
            v1.push(parse(1)?);
            v2.push(parse(2)?);
        }
        Ok(DisorderPath {
            params: meta.params,
            spec: meta.spec,
            seed: meta.seed,
            replica: meta.replica,
            v1,
            v2,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PathMeta {
    params: ModelParams,
    spec: DistributionSpec,
    seed: Option<u64>,
    replica: u64,
}

fn meta_line(meta: &PathMeta) -> String {
    let alpha = match meta.params.alpha {
        crate::model::Exponent::Ratio { .. } => format!("\"{}\"", meta.params.alpha),
        crate::model::Exponent::Value(x) => format!("{x:?}"),
    };
    let envelope = match meta.params.envelope {
        crate::model::Envelope::PowerLaw => "power_law".to_string(),
        crate::model::Envelope::Shifted { offset } => format!("shifted:{offset:?}"),
    };
    let family = match meta.spec.family {
        DistributionFamily::Gaussian => "gaussian",
        DistributionFamily::Uniform => "uniform",
        DistributionFamily::Rademacher => "rademacher",
        DistributionFamily::StudentLike => "student_like",
    };
    let seed = meta
        .seed
        .map(|s| s.to_string())
        .unwrap_or_else(|| "none".into());
    format!(
        "m={:?} lambda={:?} alpha={} envelope={} family={} seed={} replica={}",
        meta.params.m,
        meta.params.lambda,
        alpha.trim_matches('"'),
        envelope,
        family,
        seed,
        meta.replica
    )
}

fn parse_meta(line: &str) -> Result<PathMeta> {
    let mut m = None;
    let mut lambda = None;
    let mut alpha = None;
    let mut envelope = crate::model::Envelope::PowerLaw;
    let mut family = DistributionFamily::Gaussian;
    let mut seed = None;
    let mut replica = 0;
    let bad = |k: &str| Error::Io(format!("bad metadata field '{k}'"));
    for tok in line.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(tok))?;
        match k {
            "m" => m = Some(v.parse::<f64>().map_err(|_| bad(k))?),
            "lambda" => lambda = Some(v.parse::<f64>().map_err(|_| bad(k))?),
            "alpha" => alpha = Some(v.parse::<crate::model::Exponent>()?),
            "envelope" => {
                envelope = if v == "power_law" {
                    crate::model::Envelope::PowerLaw
                } else if let Some(o) = v.strip_prefix("shifted:") {
                    crate::model::Envelope::Shifted {
                        offset: o.parse().map_err(|_| bad(k))?,
                    }
                } else {
                    return Err(bad(k));
                }
            }
            "family" => family = v.parse()?,
            "seed" => {
                seed = if v == "none" {
                    None
                } else {
                    Some(v.parse().map_err(|_| bad(k))?)
                }
            }
            "replica" => replica = v.parse().map_err(|_| bad(k))?,
            _ => {}
        }
    }
    let params = ModelParams::new(
        m.ok_or_else(|| bad("m"))?,
        lambda.ok_or_else(|| bad("lambda"))?,
        alpha.ok_or_else(|| bad("alpha"))?,
    )?
    .with_envelope(envelope)?;
    Ok(PathMeta {
        params,
        spec: DistributionSpec::new(family),
        seed,
        replica,
    })
}

/// Replica 0 of the path with the given seed.
pub fn sample_path(
    params: &ModelParams,
    spec: &DistributionSpec,
    len: usize,
    seed: u64,
) -> DisorderPath {
    sample_replica(params, spec, len, seed, 0)
}

/// Independent replica `replica` of the path family with the given seed.
pub fn sample_replica(
    params: &ModelParams,
    spec: &DistributionSpec,
    len: usize,
    seed: u64,
    replica: u64,
) -> DisorderPath {
    let mut rng = stream(seed, replica);
    let mut v1 = Vec::with_capacity(len);
    let mut v2 = Vec::with_capacity(len);
    for n in 1..=len {
        let s = params.scale_at(n);
        let a = spec.transform(rng.next_u64(), rng.next_u64());
        let b = spec.transform(rng.next_u64(), rng.next_u64());
        v1.push(s * a);
        v2.push(s * b);
    }
    DisorderPath {
        params: *params,
        spec: *spec,
        seed: Some(seed),
        replica,
        v1,
        v2,
    }
}

/// Result of one assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    /// `None` when the property cannot be checked from samples.
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMoments {
    pub site: usize,
    pub component: u8,
    pub scale: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub abs_third: f64,
    pub fourth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub samples: usize,
    pub sites: Vec<SiteMoments>,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }
}

pub const VALIDATION_SITES: [usize; 5] = [1, 10, 100, 1000, 10000];
const Z: f64 = 3.0;

fn sample_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Empirical check of the standing assumptions on the potential over
/// `samples` independent replicas at a ladder of sites.
pub fn validate_assumptions(
    spec: &DistributionSpec,
    params: &ModelParams,
    samples: usize,
) -> Result<AssumptionReport> {
    if samples < 10 {
        return Err(Error::InvalidParameter(
            "at least 10 samples required".into(),
        ));
    }
    let seed = 0x5eed_0a55_u64;
    let mut sites = Vec::new();
    let mut corr_ok = true;
    let mut corr_worst: f64 = 0.0;
    let mut mean_ok = true;
    let mut var_ok = true;
    let mut fourth_ratio: f64 = 0.0;
    let alpha = params.alpha.as_f64();
    let mut log_n = Vec::new();
    let mut log_m3 = Vec::new();
    let zero = params.lambda == 0.0;
    for &n in VALIDATION_SITES.iter() {
        let scale = params.scale_at(n);
        let draws: Vec<(f64, f64)> = (0..samples as u64)
            .map(|r| {
                (
                    scale * draw(spec, seed, r, n, 1),
                    scale * draw(spec, seed, r, n, 2),
                )
            })
            .collect();
        let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let b: Vec<f64> = draws.iter().map(|d| d.1).collect();
        if !zero {
            let (ma, _) = sample_stats(&a);
            let (mb, _) = sample_stats(&b);
            let cov: f64 = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - ma) * (y - mb))
                .sum::<f64>()
                / samples as f64;
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / samples as f64;
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>() / samples as f64;
            let rho = cov / (va * vb).sqrt();
            corr_worst = corr_worst.max(rho.abs());
            if rho.abs() > Z / (samples as f64).sqrt() {
                corr_ok = false;
            }
        }
        for (component, xs) in [(1u8, &a), (2u8, &b)] {
            let (mean, mean_se) = sample_stats(xs);
            let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
            let (variance, variance_se) = sample_stats(&sq);
            let abs_third = xs.iter().map(|x| x.abs().powi(3)).sum::<f64>() / samples as f64;
            let fourth = xs.iter().map(|x| x.powi(4)).sum::<f64>() / samples as f64;
            if !zero {
                if mean.abs() > Z * mean_se {
                    mean_ok = false;
                }
                if (variance - scale * scale).abs() > Z * variance_se {
                    var_ok = false;
                }
                let an = params.envelope_at(n);
                fourth_ratio = fourth_ratio.max(fourth / (an * an));
                log_n.push((n as f64).ln());
                log_m3.push(abs_third.ln());
            }
            sites.push(SiteMoments {
                site: n,
                component,
                scale,
                mean,
                mean_se,
                variance,
                variance_se,
                abs_third,
                fourth,
            });
        }
    }
    let mut checks = Vec::new();
    checks.push(AssumptionCheck {
        name: "A1".into(),
        passed: Some(corr_ok),
        detail: format!(
            "max |corr(V1(n),V2(n))| = {corr_worst:.4} (limit {:.4})",
            Z / (samples as f64).sqrt()
        ),
    });
    checks.push(AssumptionCheck {
        name: "A2".into(),
        passed: Some(mean_ok),
        detail: "sample means within 3 standard errors of 0".into(),
    });
    checks.push(AssumptionCheck {
        name: "A3a".into(),
        passed: Some(var_ok),
        detail: "sample variances within 3 standard errors of (lambda a_n)^2".into(),
    });
    let m4 = spec.abs_moment(4);
    checks.push(AssumptionCheck {
        name: "A3b".into(),
        passed: Some(m4.is_some()),
        detail: match m4 {
            Some(v) => format!("E w^4 = {v}; sup_n E V^4 / a_n^2 (empirical) = {fourth_ratio:.4e}"),
            None => "fourth moment of the single-site law is infinite".into(),
        },
    });
    checks.push(AssumptionCheck {
        name: "A4".into(),
        passed: None,
        detail: "pathwise bound on sup_n |V(n)| is not decidable from finite samples".into(),
    });
    let slope = if log_n.len() >= 2 {
        crate::stats::ols(&log_n, &log_m3).slope
    } else {
        f64::NEG_INFINITY
    };
    let m3 = spec.abs_moment(3);
    let a5 = zero || (m3.is_some() && slope < -2.0 * alpha);
    checks.push(AssumptionCheck {
        name: "A5".into(),
        passed: Some(a5),
        detail: format!(
            "log-log slope of E|V|^3 = {slope:.4} (needs < {:.4}, expected {:.4})",
            -2.0 * alpha,
            -3.0 * alpha
        ),
    });
    checks.push(AssumptionCheck {
        name: "A6a".into(),
        passed: Some(spec.has_density()),
        detail: if spec.has_density() {
            "single-site law has a bounded density".into()
        } else {
            "single-site law is discrete".into()
        },
    });
    Ok(AssumptionReport {
        samples,
        sites,
        checks,
    })
}
