//! Monte-Carlo and quadrature verification of covariance bounds, auxiliary
//! inequalities and central limit theorems.
//!
//! Every run is a pure function of its configuration and seed; replicate `r`
//! always draws from `RngStream::new(seed, 0).child(r)` and reductions use a
//! fixed summation order, so reports reproduce bit for bit.

mod bounds;
mod clt;
pub mod presets;
pub mod selfcheck;
mod wavelet_mc;

pub use bounds::{lemma52_integral, verify_cov_bound_b, verify_lemma52, verify_lemma53, CovBoundConfig, Lemma52Config, Lemma53Config};
pub use clt::{
    centered_mean_k, ma_marginal, run_clt_mc, sigma2_series, simulate_ma_paths, verify_cov_bound_lag, CltRunConfig,
    LagBoundConfig, SeriesReport,
};
pub use wavelet_mc::{run_estimator_mc, run_multiscale_clt, EstimatorMcConfig, MultiscaleConfig};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::estimators::check_beta;

/// Registered functionals `K`. Each satisfies the growth, monotonicity and
/// local-boundedness conditions required by the covariance bounds (the
/// bounded ones trivially).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalSpec {
    /// `log₂|x|`.
    Log2Abs,
    /// `|x|^β`, `β ∈ (−1, α/2)`.
    AbsPow { beta: f64 },
    /// `x` clipped to `[−c, c]`.
    Clip { c: f64 },
    /// `1{lo < x ≤ hi}`.
    Indicator { lo: f64, hi: f64 },
}

impl FunctionalSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FunctionalSpec::Log2Abs => x.abs().log2(),
            FunctionalSpec::AbsPow { beta } => x.abs().powf(beta),
            FunctionalSpec::Clip { c } => x.clamp(-c, c),
            FunctionalSpec::Indicator { lo, hi } => {
                if x > lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        match *self {
            FunctionalSpec::Log2Abs => Ok(()),
            FunctionalSpec::AbsPow { beta } => check_beta(beta, alpha),
            FunctionalSpec::Clip { c } if c > 0.0 && c.is_finite() => Ok(()),
            FunctionalSpec::Clip { .. } => Err(Error::param("clip level must be positive")),
            FunctionalSpec::Indicator { lo, hi } if lo < hi => Ok(()),
            FunctionalSpec::Indicator { .. } => Err(Error::param("indicator needs lo < hi")),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            FunctionalSpec::Log2Abs => "log2abs".into(),
            FunctionalSpec::AbsPow { beta } => format!("abspow({beta})"),
            FunctionalSpec::Clip { c } => format!("clip({c})"),
            FunctionalSpec::Indicator { lo, hi } => format!("indicator({lo},{hi}]"),
        }
    }

    /// Applies `K`, failing on non-finite output (e.g. `log₂ 0`).
    pub fn apply_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        x.iter()
            .map(|v| {
                let k = self.eval(*v);
                if k.is_finite() {
                    Ok(k)
                } else {
                    Err(Error::data(format!("{} is not finite at x = {v}", self.label())))
                }
            })
            .collect()
    }
}

impl std::str::FromStr for FunctionalSpec {
    type Err = Error;

    /// `log2abs`, `abspow:<β>`, `clip:<c>`, `indicator:<lo>:<hi>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::param(format!("functional '{s}' is missing a numeric parameter")))
        };
        match parts[0] {
            "log2abs" => Ok(Self::Log2Abs),
            "abspow" => Ok(Self::AbsPow { beta: num(1)? }),
            "clip" => Ok(Self::Clip { c: num(1)? }),
            "indicator" => Ok(Self::Indicator { lo: num(1)?, hi: num(2)? }),
            other => Err(Error::param(format!("unknown functional '{other}'"))),
        }
    }
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn ln_normal_cdf(z: f64) -> f64 {
    normal_cdf(z).max(f64::MIN_POSITIVE).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdResult {
    pub a2: f64,
    /// Small-sample adjusted statistic `A²(1 + 0.75/n + 2.25/n²)`.
    pub a2_star: f64,
    pub p_value: f64,
}

/// Anderson–Darling test of normality with estimated mean and variance.
pub fn ad_normality(samples: &[f64]) -> Result<AdResult> {
    let n = samples.len();
    if n < 20 {
        return Err(Error::diag(format!("Anderson–Darling needs at least 20 samples, got {n}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("non-finite sample in normality test"));
    }
    let mean = crate::stats::mean(samples);
    let sd = crate::stats::variance(samples).sqrt();
    if !(sd > 0.0) || sd < 1e-14 * mean.abs() {
        return Err(Error::diag("degenerate sample: zero variance"));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (ln_normal_cdf(z[i]) + ln_normal_cdf(-z[n - 1 - i])))
        .sum();
    let a2 = -nf - s / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        // the quadratic fit turns upward far in the tail; it is already ~1e-30 at 13
        let a = a.min(13.0);
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    Ok(AdResult {
        a2,
        a2_star: a,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// One pass/fail judgement with the tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: String,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, tolerance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            tolerance: tolerance.into(),
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Summary of one configuration (e.g. one sample size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportRow {
    pub label: String,
    pub n: Option<usize>,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ad: Option<AdResult>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub label: String,
    pub slope: f64,
    pub se: f64,
    pub target: f64,
    pub points: usize,
}

/// Long-form per-replicate record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub config_id: String,
    pub replicate: usize,
    pub n: usize,
    pub statistic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub name: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub hypothesis_met: bool,
    pub banners: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<SlopeFit>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip)]
    pub samples: Vec<SampleRecord>,
    pub runtime_secs: f64,
}

impl McReport {
    pub fn new(name: &str, seed: u64, config: &impl Serialize) -> Self {
        Self {
            name: name.into(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            hypothesis_met: true,
            banners: Vec::new(),
            rows: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            samples: Vec::new(),
            runtime_secs: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// `config_id,replicate,N,statistic,value` rows.
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("config_id,replicate,N,statistic,value\n");
        for r in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.config_id,
                r.replicate,
                r.n,
                r.statistic,
                crate::io::fmt_real(r.value)
            );
        }
        s
    }

    pub fn summary_lines(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .map(|v| {
                format!(
                    "{} {}: {:.6} ({}){}",
                    if v.passed { "PASS" } else { "FAIL" },
                    v.name,
                    v.value,
                    v.tolerance,
                    if v.detail.is_empty() { String::new() } else { format!(" {}", v.detail) }
                )
            })
            .collect()
    }
}

pub(crate) fn row_from(label: impl Into<String>, n: Option<usize>, x: &[f64], with_ad: bool) -> ReportRow {
    ReportRow {
        label: label.into(),
        n,
        count: x.len(),
        mean: crate::stats::mean(x),
        variance: if x.len() > 1 { crate::stats::variance(x) } else { f64::NAN },
        ad: if with_ad { ad_normality(x).ok() } else { None },
        extra: BTreeMap::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{open01, RngStream};
    use crate::stable::{sample_sas, StableParams};

    fn normals(stream: RngStream, n: usize) -> Vec<f64> {
        let mut rng = stream.rng();
        (0..n)
            .map(|_| {
                let (u1, u2) = (open01(&mut rng), open01(&mut rng));
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect()
    }

    #[test]
    fn ad_calibration_and_power() {
        let mut pass = 0;
        for s in 0..100 {
            let x = normals(RngStream::new(s, 0), 10_000);
            if ad_normality(&x).unwrap().p_value > 0.01 {
                pass += 1;
            }
        }
        assert!(pass >= 96, "{pass}");
        let c = sample_sas(StableParams::new(1.0, 1.0).unwrap(), RngStream::new(1, 1), 10_000).unwrap();
        assert!(ad_normality(&c).unwrap().p_value < 1e-3);
        assert!(matches!(ad_normality(&[1.0; 50]), Err(Error::Diagnostics(_))));
        assert!(ad_normality(&[1.0; 5]).is_err());
    }

    #[test]
    fn functionals() {
        assert_eq!(FunctionalSpec::Clip { c: 1.0 }.eval(-3.0), -1.0);
        assert_eq!(FunctionalSpec::Log2Abs.eval(-8.0), 3.0);
        assert!(FunctionalSpec::AbsPow { beta: 0.9 }.validate(1.6).is_err());
        assert!(FunctionalSpec::AbsPow { beta: 0.4 }.validate(1.6).is_ok());
        assert!(FunctionalSpec::Log2Abs.apply_all(&[1.0, 0.0]).is_err());
        assert_eq!("abspow:0.5".parse::<FunctionalSpec>().unwrap(), FunctionalSpec::AbsPow { beta: 0.5 });
        assert_eq!(
            "indicator:0:1e300".parse::<FunctionalSpec>().unwrap(),
            FunctionalSpec::Indicator { lo: 0.0, hi: 1e300 }
        );
        assert!("wobble".parse::<FunctionalSpec>().is_err());
    }
}
