//! Run configuration: a TOML document in which every field has a default,
//! plus resolution (range expansion, theta normalization) and a stable
//! fingerprint of the resolved form.

use std::path::Path;
use std::sync::Arc;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amplifier::{derive_params, AmplifierParams, GChoice, LChoice, ParamRequest, SDirectMethod};
use crate::error::{Error, Result};
use crate::forms::{builtin, HeckeEigenform};
use crate::lfunc::theta_to_rational;

/// Largest number of grid points a scan may request.
pub const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormConfig {
    /// Builtin form name, used when `file` is absent.
    pub name: String,
    /// Path to an eigenform file; takes precedence over `name`.
    pub file: Option<String>,
}

impl Default for FormConfig {
    fn default() -> Self {
        Self {
            name: "delta".into(),
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Seed for sampled property checks.
    pub seed: u64,
    /// Output format; when absent each command uses its own default.
    pub format: Option<OutputFormat>,
    /// Output path; standard output when absent.
    pub out: Option<String>,
    /// Ramanujan-Petersson exponent, as "a/b" or a decimal.
    pub theta: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            threads: 1,
            seed: 1,
            format: None,
            out: None,
            theta: "7/64".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GMode {
    #[default]
    Fixed,
    Theorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LMode {
    #[default]
    Theorem,
    Fixed,
    Primes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Recurrence,
    Pairwise,
}

impl From<Method> for SDirectMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Recurrence => SDirectMethod::Recurrence,
            Method::Pairwise => SDirectMethod::Pairwise,
        }
    }
}

/// One amplified-moment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    pub q: u64,
    pub t: f64,
    pub x: f64,
    pub chi_index: u64,
    pub g_mode: GMode,
    /// G when `g_mode = "fixed"`.
    pub g: f64,
    pub l_mode: LMode,
    /// L when `l_mode` is "fixed" or "primes".
    pub l: f64,
    /// Prime window when `l_mode = "primes"`.
    pub primes: Vec<u64>,
    pub r_offset: f64,
    pub method: Method,
    /// Also evaluate the quadruple-loop oracle.
    pub oracle: bool,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            q: 11,
            t: 0.0,
            x: 80.0,
            chi_index: 1,
            g_mode: GMode::Fixed,
            g: 12.0,
            l_mode: LMode::Theorem,
            l: 2.0,
            primes: Vec::new(),
            r_offset: 0.0,
            method: Method::Recurrence,
            oracle: true,
        }
    }
}

impl MomentConfig {
    /// Amplifier parameters for a form of the given level.
    pub fn params(&self, level: u64, theta: Rational64) -> Result<AmplifierParams> {
        let l = match self.l_mode {
            LMode::Theorem => LChoice::Theorem,
            LMode::Fixed => LChoice::Fixed(self.l),
            LMode::Primes => LChoice::Primes {
                l: self.l,
                primes: self.primes.clone(),
            },
        };
        let g = match self.g_mode {
            GMode::Fixed => GChoice::Fixed(self.g),
            GMode::Theorem => GChoice::Theorem,
        };
        derive_params(&ParamRequest {
            q: self.q,
            t: self.t,
            level,
            theta,
            g,
            l,
            x: Some(self.x),
            r_offset: self.r_offset,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QRange {
    pub start: u64,
    pub end: u64,
    #[serde(default = "one")]
    pub step: u64,
    /// Keep only prime moduli.
    #[serde(default)]
    pub primes_only: bool,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub q_values: Vec<u64>,
    /// Replaces `q_values` when present.
    pub q_range: Option<QRange>,
    pub t_values: Vec<f64>,
    /// Replaces `t_values` when present.
    pub t_range: Option<TRange>,
    /// Character index per modulus; the first nonprincipal one when absent.
    pub chi_index: Option<u64>,
    /// x = x_factor * Q * (1 + |t|).
    pub x_factor: f64,
    /// Record wall-clock milliseconds per point (0 when disabled).
    pub timings: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            q_values: vec![11, 23, 47, 101, 211],
            q_range: None,
            t_values: vec![0.0, 1.0, 4.0, 16.0],
            t_range: None,
            chi_index: None,
            x_factor: 3.0,
            timings: true,
        }
    }
}

impl ScanConfig {
    /// Grid points (Q, t), Q-major.
    pub fn points(&self) -> Vec<(u64, f64)> {
        let mut out = Vec::with_capacity(self.q_values.len() * self.t_values.len());
        for &q in &self.q_values {
            for &t in &self.t_values {
                out.push((q, t));
            }
        }
        out
    }
}

/// Whole-run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub form: FormConfig,
    pub moment: MomentConfig,
    pub scan: ScanConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                field: String::new(),
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn theta(&self) -> Result<Rational64> {
        parse_theta(&self.run.theta)
    }

    /// Expands ranges, normalizes theta and validates the grid.
    pub fn resolved(&self) -> Result<Self> {
        let mut r = self.clone();
        let theta = self.theta()?;
        r.run.theta = format!("{}/{}", theta.numer(), theta.denom());
        if let Some(range) = r.scan.q_range.take() {
            if range.step == 0 || range.start == 0 || range.end < range.start {
                return Err(Error::invalid("q_range needs 1 <= start <= end and step >= 1"));
            }
            r.scan.q_values = (range.start..=range.end)
                .step_by(range.step as usize)
                .filter(|&q| !range.primes_only || crate::ntheory::is_prime(q))
                .collect();
        }
        if let Some(range) = r.scan.t_range.take() {
            if range.count == 0 || !(range.end >= range.start) {
                return Err(Error::invalid("t_range needs count >= 1 and end >= start"));
            }
            r.scan.t_values = if range.count == 1 {
                vec![range.start]
            } else {
                (0..range.count)
                    .map(|i| range.start + (range.end - range.start) * i as f64 / (range.count - 1) as f64)
                    .collect()
            };
        }
        if r.scan.q_values.contains(&0) {
            return Err(Error::invalid("scan moduli must be positive"));
        }
        let n = r.scan.q_values.len() * r.scan.t_values.len();
        if n > MAX_GRID_POINTS {
            return Err(Error::invalid(format!(
                "scan grid has {n} points; the limit is {MAX_GRID_POINTS}"
            )));
        }
        Ok(r)
    }

    /// TOML echo of this configuration.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of the resolved echo.
    pub fn fingerprint(&self) -> Result<String> {
        let digest = Sha256::digest(self.resolved()?.echo().as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    /// The eigenform selected by the `form` section.
    pub fn load_form(&self) -> Result<Arc<HeckeEigenform>> {
        match &self.form.file {
            Some(path) => Ok(Arc::new(HeckeEigenform::load(Path::new(path))?)),
            None => builtin(&self.form.name),
        }
    }
}

/// Parses theta from "a/b" or a decimal.
pub fn parse_theta(text: &str) -> Result<Rational64> {
    let t = text.trim();
    let r = if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| Error::invalid(format!("bad theta `{t}`")))?;
        let b: i64 = b.trim().parse().map_err(|_| Error::invalid(format!("bad theta `{t}`")))?;
        if b <= 0 {
            return Err(Error::invalid(format!("bad theta `{t}`")));
        }
        Rational64::new(a, b)
    } else {
        let v: f64 = t.parse().map_err(|_| Error::invalid(format!("bad theta `{t}`")))?;
        theta_to_rational(v)?
    };
    if r < Rational64::from_integer(0) || r >= Rational64::new(1, 2) {
        return Err(Error::invalid(format!("theta must lie in [0, 1/2), got {r}")));
    }
    Ok(r)
}
