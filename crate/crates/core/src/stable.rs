//! Symmetric alpha-stable variates and stable integrals over finite kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::rng::{open01, RngStream};

/// Stability index and scale of a SαS law with characteristic function
/// `exp(-scale^alpha |θ|^alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
    scale: f64,
}

impl StableParams {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { alpha, scale })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Checks `0 < alpha <= 2`.
pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must lie in (0, 2], got {alpha}")))
    }
}

pub(crate) fn check_alpha_open(alpha: f64, lo: f64, hi: f64, what: &str) -> Result<()> {
    if alpha > lo && alpha < hi {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} requires alpha in ({lo}, {hi}), got {alpha}"
        )))
    }
}

/// One standard (unit scale) SαS draw by the Chambers–Mallows–Stuck transform.
#[inline]
pub fn standard_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let theta = FRAC_PI_2 * (2.0 * open01(rng) - 1.0);
    if alpha == 1.0 {
        return theta.tan();
    }
    let w = -open01(rng).ln();
    let cos_t = theta.cos();
    (alpha * theta).sin() / cos_t.powf(1.0 / alpha)
        * (((1.0 - alpha) * theta).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Fills `out` with standard SαS draws.
pub fn fill_standard_sas<R: Rng + ?Sized>(alpha: f64, rng: &mut R, out: &mut [f64]) {
    for x in out.iter_mut() {
        *x = standard_sas(alpha, rng);
    }
}

/// `n` i.i.d. SαS(alpha, scale) samples, deterministic in `(params, stream)`.
pub fn sample_sas(params: StableParams, stream: RngStream, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    let mut rng = stream.rng();
    Ok((0..n)
        .map(|_| params.scale * standard_sas(params.alpha, &mut rng))
        .collect())
}

/// `sign(a)|a|^p`.
pub fn signed_power(a: f64, p: f64) -> Result<f64> {
    if a == 0.0 {
        if p > 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Domain(format!("0^<{p}> is undefined for p <= 0")));
    }
    Ok(a.signum() * a.abs().powf(p))
}

/// Unchecked `sign(a)|a|^p` for `p > 0`.
#[inline]
pub(crate) fn spow(a: f64, p: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a.signum() * a.abs().powf(p)
    }
}

/// A function on a finite measure space: atom masses `mass[i] > 0` carrying
/// values `value[i]`. Kernels used together must share the same masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteKernel {
    mass: Vec<f64>,
    value: Vec<f64>,
}

impl DiscreteKernel {
    pub fn new(mass: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::param("kernel needs at least one atom"));
        }
        if mass.len() != value.len() {
            return Err(Error::Shape(format!(
                "{} masses but {} values",
                mass.len(),
                value.len()
            )));
        }
        if let Some(i) = mass.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::param(format!("atom {i} has non-positive mass {}", mass[i])));
        }
        if let Some(i) = value.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("atom {i} has non-finite value")));
        }
        Ok(Self { mass, value })
    }

    /// Kernel on unit-mass atoms (counting measure).
    pub fn counting(value: Vec<f64>) -> Result<Self> {
        let mass = vec![1.0; value.len()];
        Self::new(mass, value)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    /// `c * self` on the same atoms.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mass: self.mass.clone(),
            value: self.value.iter().map(|v| c * v).collect(),
        }
    }

    /// A kernel sharing this kernel's atoms with new values.
    pub fn with_values(&self, value: Vec<f64>) -> Result<Self> {
        Self::new(self.mass.clone(), value)
    }

    pub(crate) fn same_atoms(&self, other: &Self) -> Result<()> {
        if self.mass.len() != other.mass.len() {
            return Err(Error::Shape(format!(
                "kernels have {} and {} atoms",
                self.mass.len(),
                other.mass.len()
            )));
        }
        let mismatch = self
            .mass
            .iter()
            .zip(&other.mass)
            .position(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(b.abs()));
        match mismatch {
            Some(i) => Err(Error::Shape(format!("atom {i} masses differ between kernels"))),
            None => Ok(()),
        }
    }

    /// `Σ μᵢ|fᵢ|^α`.
    pub fn alpha_mass(&self, alpha: f64) -> f64 {
        self.mass
            .iter()
            .zip(&self.value)
            .map(|(m, v)| m * v.abs().powf(alpha))
            .sum()
    }
}

/// `‖f‖_α = (Σ μᵢ|fᵢ|^α)^{1/α}`.
pub fn alpha_norm(k: &DiscreteKernel, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(k.alpha_mass(alpha).powf(1.0 / alpha))
}

/// `‖u f + v g‖_α^α`.
pub(crate) fn combo_mass(f: &DiscreteKernel, g: &DiscreteKernel, alpha: f64, u: f64, v: f64) -> f64 {
    f.mass
        .iter()
        .zip(f.value.iter().zip(&g.value))
        .map(|(m, (a, b))| m * (u * a + v * b).abs().powf(alpha))
        .sum()
}

/// Joint characteristic function `E exp(i(uξ + vη)) = exp(-‖uf+vg‖_α^α)`.
pub fn joint_char_fn(
    f: &DiscreteKernel,
    g: &DiscreteKernel,
    alpha: f64,
    u: f64,
    v: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    f.same_atoms(g)?;
    Ok((-combo_mass(f, g, alpha, u, v)).exp())
}

/// `n` joint draws of `(∫k₁ dM, ∫k₂ dM, ...)` with `M` the SαS random measure
/// whose control measure is the shared atom masses. Row `r` holds draw `r`.
pub fn sample_joint(
    kernels: &[DiscreteKernel],
    alpha: f64,
    stream: RngStream,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::param("sample count must be at least 1"));
    }
    let first = kernels
        .first()
        .ok_or_else(|| Error::param("at least one kernel is required"))?;
    for k in &kernels[1..] {
        first.same_atoms(k)?;
    }
    // per-kernel weights fᵢ μᵢ^{1/α}
    let weights: Vec<Vec<f64>> = kernels
        .iter()
        .map(|k| {
            k.value
                .iter()
                .zip(&first.mass)
                .map(|(v, m)| v * m.powf(1.0 / alpha))
                .collect()
        })
        .collect();
    let mut rng = stream.rng();
    let mut z = vec![0.0; first.len()];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        fill_standard_sas(alpha, &mut rng, &mut z);
        rows.push(
            weights
                .iter()
                .map(|w| w.iter().zip(&z).map(|(a, b)| a * b).sum())
                .collect(),
        );
    }
    Ok(rows)
}
