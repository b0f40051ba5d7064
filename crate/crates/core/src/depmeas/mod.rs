//! Dependence measures between two jointly SαS variables given on a shared
//! finite measure space, the characteristic-function gap `U`, its exponent gap
//! `I`, their derivatives, and the non-degeneracy constants ε₁ and ε₂.

mod moving_average;

pub use moving_average::{
    check_summability, eps_scan, ma_kernel_pair, EpsScan, EpsScanRow, KernelFn, MovingAverageSpec,
    SeriesVerdict, SummabilityReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::{check_alpha_open, combo_mass, spow, DiscreteKernel};

/// Two kernels on shared atoms with a stability index in (0, 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    f: DiscreteKernel,
    g: DiscreteKernel,
    alpha: f64,
}

impl KernelPair {
    pub fn new(f: DiscreteKernel, g: DiscreteKernel, alpha: f64) -> Result<Self> {
        check_alpha_open(alpha, 0.0, 2.0, "a kernel pair")
            .map_err(|e| Error::param(e.to_string()))?;
        f.same_atoms(&g)?;
        if f.alpha_mass(alpha) <= 0.0 || g.alpha_mass(alpha) <= 0.0 {
            return Err(Error::param("both kernels must have positive alpha-norm"));
        }
        Ok(Self { f, g, alpha })
    }

    /// Pair on unit-mass atoms.
    pub fn counting(f: Vec<f64>, g: Vec<f64>, alpha: f64) -> Result<Self> {
        Self::new(
            DiscreteKernel::counting(f)?,
            DiscreteKernel::counting(g)?,
            alpha,
        )
    }

    pub fn f(&self) -> &DiscreteKernel {
        &self.f
    }

    pub fn g(&self) -> &DiscreteKernel {
        &self.g
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// The same pair with the roles of ξ and η exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            f: self.g.clone(),
            g: self.f.clone(),
            alpha: self.alpha,
        }
    }

    /// `‖f‖_α^α`.
    pub fn f_mass(&self) -> f64 {
        self.f.alpha_mass(self.alpha)
    }

    /// `‖g‖_α^α`.
    pub fn g_mass(&self) -> f64 {
        self.g.alpha_mass(self.alpha)
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.f
            .mass()
            .iter()
            .zip(self.f.value().iter().zip(self.g.value()))
            .map(|(&m, (&a, &b))| (m, a, b))
    }
}

fn require_finite_mean(p: &KernelPair, what: &str) -> Result<()> {
    check_alpha_open(p.alpha, 1.0, 2.0, what)
}

/// `[ξ,η]₁* = Σ μᵢ|fᵢ|^{α−1}|gᵢ|`, defined for α ∈ (1, 2).
pub fn m1_star(p: &KernelPair) -> Result<f64> {
    require_finite_mean(p, "[ξ,η]₁*")?;
    let e = p.alpha - 1.0;
    Ok(p.atoms().map(|(m, a, b)| m * a.abs().powf(e) * b.abs()).sum())
}

/// `[ξ,η]₁ = [ξ,η]₁* + [η,ξ]₁*`.
pub fn m1(p: &KernelPair) -> Result<f64> {
    require_finite_mean(p, "[ξ,η]₁")?;
    let e = p.alpha - 1.0;
    Ok(p
        .atoms()
        .map(|(m, a, b)| m * (a.abs().powf(e) * b.abs() + b.abs().powf(e) * a.abs()))
        .sum())
}

/// `[ξ,η]₂ = Σ μᵢ|fᵢgᵢ|^{α/2}`.
pub fn m2(p: &KernelPair) -> f64 {
    let e = p.alpha / 2.0;
    p.atoms().map(|(m, a, b)| m * (a * b).abs().powf(e)).sum()
}

/// Characteristic-function gap `U(u,v) = e^{−‖uf+vg‖^α} − e^{−‖uf‖^α−‖vg‖^α}`.
pub fn u_measure(p: &KernelPair, u: f64, v: f64) -> f64 {
    let joint = combo_mass(&p.f, &p.g, p.alpha, u, v);
    let sep = u.abs().powf(p.alpha) * p.f_mass() + v.abs().powf(p.alpha) * p.g_mass();
    // e^{-sep} (e^{sep - joint} - 1), accurate when the two exponents are close
    (-sep).exp() * (sep - joint).exp_m1()
}

/// Exponent gap `I(u,v) = ‖uf+vg‖^α − ‖uf‖^α − ‖vg‖^α`.
pub fn i_measure(p: &KernelPair, u: f64, v: f64) -> f64 {
    let a = p.alpha;
    p.atoms()
        .map(|(m, x, y)| {
            m * ((u * x + v * y).abs().powf(a) - (u * x).abs().powf(a) - (v * y).abs().powf(a))
        })
        .sum()
}

/// Codifference `−I(1, −1)`.
pub fn codifference(p: &KernelPair) -> f64 {
    -i_measure(p, 1.0, -1.0)
}

/// Exact `∂U/∂u` on a finite kernel pair.
pub fn du_measure(p: &KernelPair, u: f64, v: f64) -> Result<f64> {
    require_finite_mean(p, "∂U/∂u")?;
    let a = p.alpha;
    let mut joint = 0.0;
    let mut joint_mass = 0.0;
    let mut own = 0.0;
    for (m, x, y) in p.atoms() {
        let s = u * x + v * y;
        joint += m * spow(s, a - 1.0) * x;
        joint_mass += m * s.abs().powf(a);
        own += m * spow(u * x, a - 1.0) * x;
    }
    let sep = u.abs().powf(a) * p.f_mass() + v.abs().powf(a) * p.g_mass();
    Ok(-a * joint * (-joint_mass).exp() + a * own * (-sep).exp())
}

/// Exact `∂²U/∂u∂v` on a finite kernel pair.
///
/// Atoms where `fᵢ = 0` or `gᵢ = 0` contribute zero to the `|uf+vg|^{α−2}fg`
/// term. An atom with `fᵢgᵢ ≠ 0` and `ufᵢ + vgᵢ = 0` makes that term diverge and
/// is reported as a singularity.
pub fn dudv_measure(p: &KernelPair, u: f64, v: f64) -> Result<f64> {
    require_finite_mean(p, "∂²U/∂u∂v")?;
    let a = p.alpha;
    let mut curv = 0.0;
    let mut joint_f = 0.0;
    let mut joint_g = 0.0;
    let mut joint_mass = 0.0;
    let mut own_f = 0.0;
    let mut own_g = 0.0;
    for (i, (m, x, y)) in p.atoms().enumerate() {
        let s = u * x + v * y;
        if x != 0.0 && y != 0.0 {
            let scale = (u * x).abs() + (v * y).abs();
            if s.abs() <= 1e-12 * scale || s == 0.0 {
                return Err(Error::Singularity {
                    atom: i,
                    detail: format!("u·f + v·g vanishes at (u, v) = ({u}, {v}) while f·g ≠ 0"),
                });
            }
            curv += m * s.abs().powf(a - 2.0) * x * y;
        }
        let sp = spow(s, a - 1.0);
        joint_f += m * sp * x;
        joint_g += m * sp * y;
        joint_mass += m * s.abs().powf(a);
        own_f += m * spow(u * x, a - 1.0) * x;
        own_g += m * spow(v * y, a - 1.0) * y;
    }
    let sep = u.abs().powf(a) * p.f_mass() + v.abs().powf(a) * p.g_mass();
    let ej = (-joint_mass).exp();
    Ok(-a * (a - 1.0) * curv * ej + a * a * joint_f * joint_g * ej
        - a * a * own_f * own_g * (-sep).exp())
}

/// The three upper bounds on `|U(u,v)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lemma31Bound {
    /// `2|uv|^{α/2}[ξ,η]₂`
    Plain,
    /// `2|uv|^{α/2} exp(−(|u|^{α/2}‖ξ‖^{α/2} − |v|^{α/2}‖η‖^{α/2})²)[ξ,η]₂`
    Gaussian,
    /// `2|uv|^{α/2} exp(−2(‖ξ‖^{α/2}‖η‖^{α/2} − [ξ,η]₂)|uv|^{α/2})[ξ,η]₂`
    HolderGap,
}

impl Lemma31Bound {
    pub const ALL: [Lemma31Bound; 3] = [Self::Plain, Self::Gaussian, Self::HolderGap];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Plain => "3.4",
            Self::Gaussian => "3.5",
            Self::HolderGap => "3.6",
        }
    }
}

/// Value of the selected bound at `(u, v)`.
pub fn lemma31_bound(p: &KernelPair, which: Lemma31Bound, u: f64, v: f64) -> f64 {
    let h = p.alpha / 2.0;
    let m2v = m2(p);
    let uv = (u * v).abs().powf(h);
    // ‖ξ‖^{α/2} = (‖f‖^α)^{1/2}
    let nf = p.f_mass().sqrt();
    let ng = p.g_mass().sqrt();
    let base = 2.0 * uv * m2v;
    match which {
        Lemma31Bound::Plain => base,
        Lemma31Bound::Gaussian => {
            let d = u.abs().powf(h) * nf - v.abs().powf(h) * ng;
            base * (-d * d).exp()
        }
        Lemma31Bound::HolderGap => base * (-2.0 * (nf * ng - m2v) * uv).exp(),
    }
}

/// Largest `|U|/bound` over a grid of `(u, v)` points; `0/0` counts as 0.
pub fn lemma31_ratio(p: &KernelPair, which: Lemma31Bound, grid: &[(f64, f64)]) -> f64 {
    grid.iter()
        .map(|&(u, v)| {
            let num = u_measure(p, u, v).abs();
            let den = lemma31_bound(p, which, u, v);
            if den == 0.0 {
                if num == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                num / den
            }
        })
        .fold(0.0, f64::max)
}

/// Uniform `n × n` grid on `[lo, hi]²`.
pub fn square_grid(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push((lo + i as f64 * step, lo + j as f64 * step));
        }
    }
    out
}

/// ε₁ = 1 − [ξ,η]₂ / (‖ξ‖^{α/2}‖η‖^{α/2}); Assumption (A1) holds iff it is positive.
pub fn estimate_eps1(p: &KernelPair) -> f64 {
    let denom = (p.f_mass() * p.g_mass()).sqrt();
    (1.0 - m2(p) / denom).clamp(0.0, 1.0)
}

const EPS2_GRID: usize = 512;
const GOLDEN_TOL: f64 = 1e-8;

/// ε₂ = inf of `‖uf+vg‖^α` over `|u|^α‖f‖^α + |v|^α‖g‖^α = 1`.
///
/// The constraint curve is parameterized by an angle θ with
/// `u = cos θ^{<2/α>}/‖f‖`, `v = sin θ^{<2/α>}/‖g‖`; θ ∈ [0, π) covers it up to
/// the sign symmetry. A 512-point grid brackets every local minimum, each of
/// which is refined by golden-section search.
pub fn estimate_eps2(p: &KernelPair) -> f64 {
    let a = p.alpha;
    let nf = p.f_mass().powf(1.0 / a);
    let ng = p.g_mass().powf(1.0 / a);
    let objective = |theta: f64| {
        let u = spow(theta.cos(), 2.0 / a) / nf;
        let v = spow(theta.sin(), 2.0 / a) / ng;
        combo_mass(&p.f, &p.g, a, u, v)
    };
    let step = std::f64::consts::PI / EPS2_GRID as f64;
    let values: Vec<f64> = (0..EPS2_GRID).map(|k| objective(k as f64 * step)).collect();
    let mut best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    for k in 0..EPS2_GRID {
        let prev = values[(k + EPS2_GRID - 1) % EPS2_GRID];
        let next = values[(k + 1) % EPS2_GRID];
        if values[k] <= prev && values[k] <= next {
            let lo = (k as f64 - 1.0) * step;
            let hi = (k as f64 + 1.0) * step;
            best = best.min(golden_min(&objective, lo, hi, GOLDEN_TOL));
        }
    }
    best.clamp(0.0, 1.0)
}

pub(crate) fn golden_min(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = f1.min(f2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        best = best.min(f1).min(f2);
    }
    best
}

/// Change of representation: atom `i` of the result carries
/// `f/hᵢ, g/hᵢ` with mass `|hᵢ|^α μᵢ`, placed at position `relabel[i]`.
pub fn representation_transform(p: &KernelPair, h: &[f64], relabel: &[usize]) -> Result<KernelPair> {
    let n = p.len();
    if h.len() != n || relabel.len() != n {
        return Err(Error::Shape(format!(
            "pair has {n} atoms, got {} multipliers and {} labels",
            h.len(),
            relabel.len()
        )));
    }
    if let Some(i) = h.iter().position(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::param(format!("multiplier {i} must be finite and non-zero")));
    }
    let mut seen = vec![false; n];
    for &r in relabel {
        if r >= n || seen[r] {
            return Err(Error::param("relabel must be a permutation of the atom indices"));
        }
        seen[r] = true;
    }
    let mut mass = vec![0.0; n];
    let mut fv = vec![0.0; n];
    let mut gv = vec![0.0; n];
    for i in 0..n {
        let j = relabel[i];
        mass[j] = h[i].abs().powf(p.alpha) * p.f.mass()[i];
        fv[j] = p.f.value()[i] / h[i];
        gv[j] = p.g.value()[i] / h[i];
    }
    KernelPair::new(
        DiscreteKernel::new(mass.clone(), fv)?,
        DiscreteKernel::new(mass, gv)?,
        p.alpha,
    )
}

/// All pairwise dependence quantities for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub m1_star_fg: f64,
    pub m1_star_gf: f64,
    pub m1: f64,
    pub m2: f64,
    pub codifference: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub alpha: f64,
}

impl DependenceReport {
    /// Requires α ∈ (1, 2) for the `[·,·]₁` quantities.
    pub fn compute(p: &KernelPair) -> Result<Self> {
        let fg = m1_star(p)?;
        let gf = m1_star(&p.swapped())?;
        Ok(Self {
            m1_star_fg: fg,
            m1_star_gf: gf,
            m1: fg + gf,
            m2: m2(p),
            codifference: codifference(p),
            eps1: estimate_eps1(p),
            eps2: estimate_eps2(p),
            alpha: p.alpha,
        })
    }
}
