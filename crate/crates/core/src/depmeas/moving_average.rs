//! Moving-average sequences `ξₙ = ∫ a(n − x) M(dx)`: kernel families, the
//! discretized pair `(ξ₀, ξₙ)`, and summability diagnostics for the block
//! integrals `∫_{m−1}^m |a|^α`.

use serde::{Deserialize, Serialize};

use super::{estimate_eps1, estimate_eps2, m1, m2, KernelPair};
use crate::error::{Error, Result};
use crate::stable::{check_alpha_open, DiscreteKernel};

/// Registered moving-average kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelFn {
    /// `a(x) = x^{−p}` for `x ≥ 1`, zero otherwise.
    PowerLaw { p: f64 },
    /// `a(x) = 1` on `[lo, hi)`, zero otherwise.
    Indicator { lo: f64, hi: f64 },
}

impl KernelFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            KernelFn::PowerLaw { p } => {
                if x >= 1.0 {
                    x.powf(-p)
                } else {
                    0.0
                }
            }
            KernelFn::Indicator { lo, hi } => {
                if x >= lo && x < hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Left end of the support.
    pub fn support_start(&self) -> f64 {
        match *self {
            KernelFn::PowerLaw { .. } => 1.0,
            KernelFn::Indicator { lo, .. } => lo,
        }
    }

    /// `∫_T^∞ |a|^α dx`.
    pub fn tail_mass(&self, alpha: f64, t: f64) -> f64 {
        match *self {
            KernelFn::PowerLaw { p } => {
                let e = p * alpha - 1.0;
                t.max(1.0).powf(-e) / e
            }
            KernelFn::Indicator { lo, hi } => (hi - t.max(lo)).max(0.0),
        }
    }

    /// `‖a‖_α^α`.
    pub fn total_mass(&self, alpha: f64) -> f64 {
        self.tail_mass(alpha, f64::NEG_INFINITY)
    }

    fn validate(&self, alpha: f64) -> Result<()> {
        match *self {
            KernelFn::PowerLaw { p } => {
                if !(p * alpha > 1.0) {
                    return Err(Error::param(format!(
                        "power-law kernel needs p > 1/alpha for finite alpha-mass, got p = {p}"
                    )));
                }
            }
            KernelFn::Indicator { lo, hi } => {
                if !(hi > lo && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::param("indicator kernel needs lo < hi"));
                }
            }
        }
        Ok(())
    }
}

/// Default quadrature step for moving-average kernels.
pub const DEFAULT_MA_STEP: f64 = 1.0 / 64.0;
/// Relative α-mass left beyond the truncation horizon by default.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingAverageSpec {
    pub kernel: KernelFn,
    pub alpha: f64,
    /// `a(x) = 0` for `x < causal_shift`; must be ≤ 0.
    pub causal_shift: f64,
    pub step: f64,
    pub horizon: f64,
}

impl MovingAverageSpec {
    /// Spec with the default step and the smallest horizon leaving less than
    /// `1e-6` of the α-mass in the tail.
    pub fn new(kernel: KernelFn, alpha: f64) -> Result<Self> {
        kernel.validate(alpha)?;
        let horizon = default_horizon(&kernel, alpha);
        Self::with_grid(kernel, alpha, 0.0, DEFAULT_MA_STEP, horizon)
    }

    pub fn with_grid(kernel: KernelFn, alpha: f64, causal_shift: f64, step: f64, horizon: f64) -> Result<Self> {
        check_alpha_open(alpha, 1.0, 2.0, "a moving average")
            .map_err(|e| Error::param(e.to_string()))?;
        kernel.validate(alpha)?;
        if causal_shift > 0.0 {
            return Err(Error::param("causal shift x₀ must be ≤ 0"));
        }
        if kernel.support_start() < causal_shift {
            return Err(Error::param(format!(
                "non-causal kernel: a(x) ≠ 0 for x < x₀ = {causal_shift}"
            )));
        }
        if !(step > 0.0 && step.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("grid step and horizon must be positive"));
        }
        Ok(Self {
            kernel,
            alpha,
            causal_shift,
            step,
            horizon,
        })
    }

    /// Kernel value with the truncation horizon applied.
    pub fn a(&self, x: f64) -> f64 {
        if x > self.horizon {
            0.0
        } else {
            self.kernel.eval(x)
        }
    }

    /// Same spec on a grid with half the step and twice the horizon.
    pub fn refined(&self) -> Self {
        Self {
            step: self.step / 2.0,
            horizon: self.horizon * 2.0,
            ..*self
        }
    }

    /// Discrete weights `a((q − ½)Δ)` indexed from the first non-zero cell:
    /// element `q` multiplies the cell whose midpoint lies `(q_min + q − ½)Δ`
    /// behind the evaluation time.
    pub(crate) fn weights(&self) -> (i64, Vec<f64>) {
        let q_min = (self.causal_shift / self.step).floor() as i64 + 1;
        let q_max = (self.horizon / self.step).ceil() as i64;
        let w = (q_min..=q_max)
            .map(|q| self.a((q as f64 - 0.5) * self.step))
            .collect();
        (q_min, w)
    }
}

fn default_horizon(kernel: &KernelFn, alpha: f64) -> f64 {
    match *kernel {
        KernelFn::PowerLaw { p } => {
            let e = p * alpha - 1.0;
            // T^{-e}/e = tol/e
            DEFAULT_TAIL_TOL.powf(-1.0 / e).ceil()
        }
        KernelFn::Indicator { hi, .. } => hi.ceil().max(1.0),
    }
}

/// Discretized `(ξ₀, ξₙ)`: `f(x) = a(−x)`, `g(x) = a(n − x)` on midpoints of
/// cells of width Δ covering `[−T, n − x₀]`, each atom carrying mass Δ. Atoms
/// where both kernels vanish are dropped.
pub fn ma_kernel_pair(spec: &MovingAverageSpec, n: u64) -> Result<KernelPair> {
    let lo = -spec.horizon;
    let hi = n as f64 - spec.causal_shift;
    let cells = ((hi - lo) / spec.step).ceil() as usize;
    let mut fv = Vec::new();
    let mut gv = Vec::new();
    for i in 0..cells {
        let x = lo + (i as f64 + 0.5) * spec.step;
        let a = spec.a(-x);
        let b = spec.a(n as f64 - x);
        if a != 0.0 || b != 0.0 {
            fv.push(a);
            gv.push(b);
        }
    }
    let mass = vec![spec.step; fv.len()];
    KernelPair::new(
        DiscreteKernel::new(mass.clone(), fv)?,
        DiscreteKernel::new(mass, gv)?,
        spec.alpha,
    )
}

/// Convergence verdict for `Σ_m (∫_{m−1}^m |a|^α)^e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict {
    pub exponent: f64,
    pub partial_sums: Vec<f64>,
    /// Log-log slope of the terms over the last three quarters of blocks.
    pub tail_slope: Option<f64>,
    /// Numeric verdict from the tail slope (slope < −1); a heuristic only.
    pub heuristic_convergent: bool,
    /// Exact verdict where the kernel family admits one.
    pub analytic_convergent: Option<bool>,
    pub convergent: bool,
    pub basis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub max_m: usize,
    pub block_integrals: Vec<f64>,
    /// First relation of the CLT condition: exponent 1/2.
    pub cond_6_1_a: SeriesVerdict,
    /// Exponent (α−1)/α, which makes `Σₙ[ξ₀,ξₙ]₁` finite.
    pub cond_6_5: SeriesVerdict,
    /// Exponent 1/2, which makes `Σₙ[ξ₀,ξₙ]₂` finite.
    pub cond_6_6: SeriesVerdict,
    pub all_hold: bool,
}

const BLOCK_SUBCELLS: usize = 1024;

pub fn check_summability(spec: &MovingAverageSpec, max_m: usize) -> Result<SummabilityReport> {
    if max_m < 8 {
        return Err(Error::param("max_m must be at least 8"));
    }
    let alpha = spec.alpha;
    let first = spec.causal_shift.floor() as i64 + 1;
    let blocks: Vec<f64> = (first..=max_m as i64)
        .map(|m| {
            let h = 1.0 / BLOCK_SUBCELLS as f64;
            (0..BLOCK_SUBCELLS)
                .map(|k| {
                    let x = (m - 1) as f64 + (k as f64 + 0.5) * h;
                    spec.kernel.eval(x).abs().powf(alpha) * h
                })
                .sum()
        })
        .collect();
    let half = series_verdict(spec, &blocks, first, 0.5);
    let mean = series_verdict(spec, &blocks, first, (alpha - 1.0) / alpha);
    let all_hold = half.convergent && mean.convergent;
    Ok(SummabilityReport {
        max_m,
        block_integrals: blocks,
        cond_6_1_a: half.clone(),
        cond_6_5: mean,
        cond_6_6: half,
        all_hold,
    })
}

fn series_verdict(spec: &MovingAverageSpec, blocks: &[f64], first: i64, e: f64) -> SeriesVerdict {
    let terms: Vec<f64> = blocks.iter().map(|b| b.powf(e)).collect();
    let mut acc = 0.0;
    let partial_sums = terms
        .iter()
        .map(|t| {
            acc += t;
            acc
        })
        .collect();
    let max_m = first + blocks.len() as i64 - 1;
    let tail: Vec<(f64, f64)> = terms
        .iter()
        .enumerate()
        .map(|(i, &t)| (first + i as i64, t))
        .filter(|&(m, t)| m >= (max_m / 4).max(2) && t > 0.0)
        .map(|(m, t)| ((m as f64).ln(), t.ln()))
        .collect();
    let tail_slope = if tail.len() >= 3 {
        Some(crate::stats::ols_slope(&tail).0)
    } else {
        None
    };
    // all tail terms zero means finitely many non-zero blocks
    let heuristic_convergent = tail_slope.map_or(true, |s| s < -1.0);
    let analytic_convergent = match spec.kernel {
        KernelFn::PowerLaw { p } => Some(p * spec.alpha * e > 1.0),
        KernelFn::Indicator { .. } => Some(true),
    };
    let (convergent, basis) = match analytic_convergent {
        Some(v) => (v, "analytic".to_string()),
        None => (heuristic_convergent, "heuristic".to_string()),
    };
    SeriesVerdict {
        exponent: e,
        partial_sums,
        tail_slope,
        heuristic_convergent,
        analytic_convergent,
        convergent,
        basis,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsScanRow {
    pub n: u64,
    pub eps1: f64,
    pub eps2: f64,
    pub m1: f64,
    pub m2: f64,
    /// Values on the refined grid (Δ/2, 2T), where computed.
    pub eps1_refined: Option<f64>,
    pub eps2_refined: Option<f64>,
}

/// ε̂₁, ε̂₂ of `(ξ₀, ξₙ)` across lags with refinement diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsScan {
    pub rows: Vec<EpsScanRow>,
    pub min_eps1: f64,
    pub min_eps2: f64,
    /// Largest relative change of ε̂₁ or ε̂₂ under grid refinement.
    pub max_refinement_change: f64,
    /// Smallest lag from which both constants stay at or above `floor`.
    pub n0: Option<u64>,
    pub floor: f64,
}

pub fn eps_scan(spec: &MovingAverageSpec, lags: &[u64], refine_at: &[u64], floor: f64) -> Result<EpsScan> {
    let fine = spec.refined();
    let mut rows = Vec::with_capacity(lags.len());
    for &n in lags {
        let p = ma_kernel_pair(spec, n)?;
        let (e1, e2) = (estimate_eps1(&p), estimate_eps2(&p));
        let (r1, r2) = if refine_at.contains(&n) {
            let q = ma_kernel_pair(&fine, n)?;
            (Some(estimate_eps1(&q)), Some(estimate_eps2(&q)))
        } else {
            (None, None)
        };
        rows.push(EpsScanRow {
            n,
            eps1: e1,
            eps2: e2,
            m1: m1(&p)?,
            m2: m2(&p),
            eps1_refined: r1,
            eps2_refined: r2,
        });
    }
    let min_eps1 = rows.iter().map(|r| r.eps1).fold(f64::INFINITY, f64::min);
    let min_eps2 = rows.iter().map(|r| r.eps2).fold(f64::INFINITY, f64::min);
    let rel = |a: f64, b: Option<f64>| b.map_or(0.0, |b| ((a - b) / a.abs().max(1e-300)).abs());
    let max_refinement_change = rows
        .iter()
        .map(|r| rel(r.eps1, r.eps1_refined).max(rel(r.eps2, r.eps2_refined)))
        .fold(0.0, f64::max);
    let mut n0 = None;
    for r in rows.iter().rev() {
        if r.eps1 >= floor && r.eps2 >= floor {
            n0 = Some(r.n);
        } else {
            break;
        }
    }
    Ok(EpsScan {
        rows,
        min_eps1,
        min_eps2,
        max_refinement_change,
        n0,
        floor,
    })
}
