//! Named configurations for the verification runs.

use super::{CltRunConfig, CovBoundConfig, EstimatorMcConfig, FunctionalSpec, Lemma52Config, Lemma53Config, MultiscaleConfig};
use crate::depmeas::{KernelFn, KernelPair, MovingAverageSpec};
use crate::error::{Error, Result};
use crate::estimators::Method;
use crate::wavelet::WaveletFamily;

pub const CLT_PRESETS: [&str; 2] = ["iid-bounded", "thm61"];
pub const BOUNDS_PRESETS: [&str; 3] = ["thm22-default", "lemma52-default", "lemma53-default"];

/// i.i.d. `ξₙ` (indicator kernel on one unit cell) with a clipped functional.
pub fn iid_bounded(seed: u64) -> CltRunConfig {
    CltRunConfig {
        ma: MovingAverageSpec::with_grid(KernelFn::Indicator { lo: 0.0, hi: 1.0 }, 1.5, 0.0, 1.0, 1.0)
            .expect("valid preset"),
        functional: FunctionalSpec::Clip { c: 1.0 },
        n_values: (10..=14).map(|e| 1usize << e).collect(),
        replicates: 200,
        seed,
        lag_cap: 16,
    }
}

/// `a(x) = x^{−2.5}1{x ≥ 1}`, α = 1.5, `K = log₂|·|`.
pub fn thm61(seed: u64) -> CltRunConfig {
    CltRunConfig {
        ma: MovingAverageSpec::with_grid(KernelFn::PowerLaw { p: 2.5 }, 1.5, 0.0, 1.0 / 32.0, 152.0)
            .expect("valid preset"),
        functional: FunctionalSpec::Log2Abs,
        n_values: (10..=14).map(|e| 1usize << e).collect(),
        replicates: 200,
        seed,
        lag_cap: 256,
    }
}

pub fn clt_preset(name: &str, seed: u64) -> Result<CltRunConfig> {
    match name {
        "iid-bounded" => Ok(iid_bounded(seed)),
        "thm61" => Ok(thm61(seed)),
        other => Err(Error::config(format!(
            "unknown clt preset '{other}' (known: {})",
            CLT_PRESETS.join(", ")
        ))),
    }
}

/// `f = (1, 0.4)`, `g = (0.4, 1)` on unit atoms, α = 1.5, β = ½.
pub fn thm22_default(seed: u64) -> CovBoundConfig {
    CovBoundConfig {
        pair: KernelPair::counting(vec![1.0, 0.4], vec![0.4, 1.0], 1.5).expect("valid preset"),
        beta: 0.5,
        bs: vec![1.0, 2.0, 4.0],
        mc: 1_000_000,
        seed,
    }
}

pub fn lemma52_default() -> Lemma52Config {
    Lemma52Config {
        alpha: 1.5,
        beta: 0.5,
        bs: vec![1.0, 2.0, 4.0],
        rs: vec![0.1, 1.0, 10.0],
    }
}

pub fn lemma53_default(seed: u64) -> Lemma53Config {
    Lemma53Config {
        samples: 1_000_000,
        alphas: vec![1.1, 1.5, 1.9],
        seed,
    }
}

/// α = 1.6, H = 0.7, Daubechies Q = 2, octaves 1..5, N from 2¹² to 2¹⁵.
pub fn estimator_default(seed: u64) -> EstimatorMcConfig {
    EstimatorMcConfig {
        alpha: 1.6,
        hurst: 0.7,
        family: WaveletFamily::Daubechies,
        q: 2,
        j_min: 1,
        j_max: 5,
        n_values: (12..=15).map(|e| 1usize << e).collect(),
        primary_n: 1 << 14,
        replicates: 200,
        seed,
        method: Method::Log,
        beta: None,
    }
}

/// Octaves 1 and 2 of the α = 1.6, H = 0.7, Q = 2 coefficients, `K = log₂|·|`.
pub fn multiscale_default(seed: u64) -> MultiscaleConfig {
    MultiscaleConfig {
        alpha: 1.6,
        hurst: 0.7,
        family: WaveletFamily::Daubechies,
        q: 2,
        j_min: 1,
        j_max: 2,
        functionals: vec![FunctionalSpec::Log2Abs],
        n: 1 << 14,
        replicates: 300,
        seed,
        lag_cap: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_build() {
        assert!(clt_preset("thm61", 1).is_ok());
        assert!(matches!(clt_preset("nope", 1), Err(Error::Config(_))));
        assert_eq!(thm22_default(1).pair.len(), 2);
    }
}
