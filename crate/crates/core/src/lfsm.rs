//! Linear fractional stable motion
//! `X(t) = ∫ {(t−u)₊^κ − (−u)₊^κ} M(du)`, the wavelet kernel
//! `h(x) = ∫ (s+x)₊^κ ψ(s) ds` and wavelet coefficients obtained directly as
//! stable integrals `d_{j,k} = ∫ 2^{j(κ+½)} h(k − 2^{−j}u) M(du)`.

use serde::{Deserialize, Serialize};

use crate::conv::FftConvolver;
use crate::depmeas::KernelPair;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::rng::RngStream;
use crate::stable::{check_alpha_open, fill_standard_sas, DiscreteKernel};
use crate::wavelet::{Segment, WaveletFamily, WaveletSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LfsmSpec {
    alpha: f64,
    hurst: f64,
    kappa: f64,
}

impl LfsmSpec {
    pub fn new(alpha: f64, hurst: f64) -> Result<Self> {
        check_alpha_open(alpha, 1.0, 2.0, "LFSM")?;
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::param(format!(
                "the self-similarity parameter H must lie in (0, 1), got {hurst}"
            )));
        }
        Ok(Self {
            alpha,
            hurst,
            kappa: hurst - 1.0 / alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `κ = H − 1/α`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `Q − H > 1/(α(α−1))`, required for the asymptotic normality of Ĥ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCondition {
    pub q_minus_h: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

pub fn moment_condition(alpha: f64, hurst: f64, q: usize) -> MomentCondition {
    let q_minus_h = q as f64 - hurst;
    let threshold = 1.0 / (alpha * (alpha - 1.0));
    MomentCondition {
        q_minus_h,
        threshold,
        satisfied: q_minus_h > threshold,
    }
}

/// Number of border-free coefficients at octave `j` of a path on `[0, N]`:
/// `N_j = ⌊(N − (2Q−1)2^j) / 2^j⌋`, indices `k = 0..N_j`.
pub fn octave_count(n: usize, q: usize, j: u32) -> usize {
    let scale = 1usize << j;
    let border = (2 * q - 1) * scale;
    if n <= border {
        0
    } else {
        (n - border) / scale
    }
}

fn binom(kappa: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (kappa - i as f64) / (i + 1) as f64)
}

const SERIES_TERMS: usize = 40;

/// Everything needed to evaluate `h` quickly for one (κ, ψ) pair.
#[derive(Debug, Clone)]
pub struct HKernel {
    kappa: f64,
    q: usize,
    support: f64,
    haar: bool,
    segments: Vec<Segment>,
    /// `∫ψ sⁿ ds`, with the vanishing ones set to zero.
    moments: Vec<f64>,
    series_from: f64,
    nodes: (Vec<f64>, Vec<f64>),
}

impl HKernel {
    pub fn new(lfsm: &LfsmSpec, w: &WaveletSpec) -> Self {
        let moments = (0..SERIES_TERMS)
            .map(|n| {
                if n < w.q {
                    return 0.0;
                }
                w.segments
                    .iter()
                    .map(|s| segment_power_integral(s, n))
                    .sum()
            })
            .collect();
        Self {
            kappa: lfsm.kappa(),
            q: w.q,
            support: w.support(),
            haar: w.family == WaveletFamily::Haar,
            segments: w.segments.clone(),
            moments,
            series_from: 8.0 * w.support(),
            nodes: gauss_legendre(8),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    /// `h(x)`; Haar uses the closed form, other wavelets integrate piecewise,
    /// switching to the moment expansion `Σ_{n≥Q} C(κ,n) μₙ x^{κ−n}` far out.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= -self.support {
            return 0.0;
        }
        if self.haar {
            return haar_h(self.kappa, x);
        }
        if x >= self.series_from {
            return self.series(x);
        }
        self.quadrature(x)
    }

    fn series(&self, x: f64) -> f64 {
        let mut sum = 0.0;
        let inv = 1.0 / x;
        let mut pw = x.powf(self.kappa) * inv.powi(self.q as i32);
        for n in self.q..SERIES_TERMS {
            let term = binom(self.kappa, n) * self.moments[n] * pw;
            sum += term;
            if n > self.q + 2 && term.abs() < 1e-18 * sum.abs() {
                break;
            }
            pw *= inv;
        }
        sum
    }

    /// Piecewise integration over the segments of ψ: closed-form
    /// antiderivatives next to the singular point `s = −x`, 8-point
    /// Gauss–Legendre elsewhere.
    pub fn quadrature(&self, x: f64) -> f64 {
        let k = self.kappa;
        let (gx, gw) = (&self.nodes.0, &self.nodes.1);
        let mut total = 0.0;
        for s in &self.segments {
            let w0 = s.t0 + x;
            let w1 = s.t1 + x;
            if w1 <= 0.0 {
                continue;
            }
            let b = (s.y1 - s.y0) / (s.t1 - s.t0);
            if w0 <= 0.0 || w1 > 2.0 * w0 {
                // ψ = a + b·w in the variable w = s + x
                let a = s.y0 - b * w0;
                let lo = w0.max(0.0);
                let anti = |w: f64| {
                    if w <= 0.0 {
                        0.0
                    } else {
                        a * w.powf(k + 1.0) / (k + 1.0) + b * w.powf(k + 2.0) / (k + 2.0)
                    }
                };
                total += anti(w1) - anti(lo);
            } else {
                let half = 0.5 * (s.t1 - s.t0);
                let mid = 0.5 * (s.t1 + s.t0);
                let mut acc = 0.0;
                for (xi, wi) in gx.iter().zip(gw) {
                    let t = mid + half * xi;
                    let psi = s.y0 + b * (t - s.t0);
                    acc += wi * (t + x).powf(k) * psi;
                }
                total += acc * half;
            }
        }
        total
    }

    /// Leading tail constant `C` of `|h(x)| ~ C x^{κ−Q}`.
    fn tail_constant(&self) -> f64 {
        (binom(self.kappa, self.q) * self.moments[self.q]).abs()
    }

    /// Smallest `X` such that `∫_X^∞ |h|^α ≤ tol · ∫|h|^α`, or `None` when
    /// `h` vanishes beyond the support (κ = 0). Errors if the tail is not
    /// α-integrable or the horizon is unreasonably long.
    pub fn truncation(&self, alpha: f64, tol: f64) -> Result<Option<f64>> {
        if self.kappa == 0.0 {
            return Ok(None);
        }
        let e = alpha * (self.q as f64 - self.kappa);
        if e <= 1.0 {
            return Err(Error::config(format!(
                "|h|^α has a non-integrable tail: α(Q − κ) = {e:.4} ≤ 1"
            )));
        }
        let x0 = self.series_from;
        let cells = 4096;
        let width = (x0 + self.support) / cells as f64;
        let body: f64 = (0..cells)
            .map(|i| self.eval(-self.support + (i as f64 + 0.5) * width).abs().powf(alpha))
            .sum::<f64>()
            * width;
        let c = 2.0 * self.tail_constant();
        let tail = |x: f64| c.powf(alpha) * x.powf(1.0 - e) / (e - 1.0);
        let total = body + tail(x0);
        let x = (c.powf(alpha) / ((e - 1.0) * tol * total)).powf(1.0 / (e - 1.0));
        let x = x.max(x0);
        if !x.is_finite() || x > 1e7 {
            return Err(Error::config(format!(
                "kernel truncation for tail tolerance {tol:e} would need X = {x:.3e}"
            )));
        }
        Ok(Some(x))
    }
}

fn segment_power_integral(s: &Segment, n: usize) -> f64 {
    // ∫_{t0}^{t1} (y0 + b(t − t0)) tⁿ dt
    let b = (s.y1 - s.y0) / (s.t1 - s.t0);
    let a = s.y0 - b * s.t0;
    let p1 = (n + 1) as i32;
    let p2 = (n + 2) as i32;
    a * (s.t1.powi(p1) - s.t0.powi(p1)) / p1 as f64 + b * (s.t1.powi(p2) - s.t0.powi(p2)) / p2 as f64
}

/// Haar closed form `(2F(x+½) − F(x) − F(x+1))`, `F(w) = w₊^{κ+1}/(κ+1)`.
pub fn haar_h(kappa: f64, x: f64) -> f64 {
    let f = |w: f64| {
        if w <= 0.0 {
            0.0
        } else {
            w.powf(kappa + 1.0) / (kappa + 1.0)
        }
    };
    2.0 * f(x + 0.5) - f(x) - f(x + 1.0)
}

pub fn h_kernel(lfsm: &LfsmSpec, w: &WaveletSpec, x: f64) -> f64 {
    HKernel::new(lfsm, w).eval(x)
}

/// Least-squares slope of `log|h(x)|` against `log x` over 32 log-spaced
/// points of `[lo, hi]`; points where `h` vanishes are skipped.
pub fn h_decay_fit(lfsm: &LfsmSpec, w: &WaveletSpec, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo >= 10.0 && hi <= 1e4 && lo < hi) {
        return Err(Error::param("decay-fit range must lie within [10, 1e4]"));
    }
    let hk = HKernel::new(lfsm, w);
    let pts: Vec<(f64, f64)> = (0..32)
        .filter_map(|i| {
            let x = lo * (hi / lo).powf(i as f64 / 31.0);
            let v = hk.eval(x).abs();
            (v > 1e-300).then(|| (x.ln(), v.ln()))
        })
        .collect();
    if pts.len() < 8 {
        return Err(Error::diag(format!(
            "only {} non-vanishing points of h in [{lo}, {hi}]",
            pts.len()
        )));
    }
    Ok(crate::stats::ols_slope(&pts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Path length: samples at `t = 0..=n`.
    pub n: usize,
    /// Uniform cell width of the control measure near the observation window.
    pub step: f64,
    /// The uniform region covers `[−near_horizon, n]`.
    pub near_horizon: f64,
    /// Relative width of the geometric cells beyond the uniform region.
    pub far_ratio: f64,
    /// Relative α-mass allowed outside the discretized region.
    pub tail_tol: f64,
    pub j_min: u32,
    pub j_max: u32,
    /// Coefficient route: `2^r` cells per unit of the rescaled variable.
    pub cells_log2: u32,
    pub stream: RngStream,
}

impl SynthesisConfig {
    pub fn new(n: usize, j_min: u32, j_max: u32, stream: RngStream) -> Self {
        Self {
            n,
            step: 0.125,
            near_horizon: n as f64,
            far_ratio: 1.0 / 32.0,
            tail_tol: 1e-6,
            j_min,
            j_max,
            cells_log2: 4,
            stream,
        }
    }

    pub fn with_stream(&self, stream: RngStream) -> Self {
        Self { stream, ..*self }
    }

    fn validate(&self) -> Result<usize> {
        if self.n < 2 {
            return Err(Error::config("path length must be at least 2"));
        }
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::config("cell width must lie in (0, 1]"));
        }
        let per_unit = (1.0 / self.step).round();
        if ((1.0 / self.step) - per_unit).abs() > 1e-9 {
            return Err(Error::config("cell width must be 1/m for an integer m"));
        }
        if !(self.near_horizon >= 0.0 && self.far_ratio > 0.0 && self.tail_tol > 0.0) {
            return Err(Error::config("horizons and tolerances must be positive"));
        }
        if self.j_min > self.j_max {
            return Err(Error::config("octave range is empty"));
        }
        Ok(per_unit as usize)
    }
}

/// Left edge of the discretized control measure for the path at tolerance
/// `tol`; beyond it the increment kernel `(t−u)^κ − (−u)^κ` carries at most
/// `tol` of the α-mass of `X(n)`.
pub fn far_horizon(lfsm: &LfsmSpec, n: usize, tol: f64) -> Result<f64> {
    let (a, k) = (lfsm.alpha(), lfsm.kappa());
    if k == 0.0 {
        return Ok(0.0);
    }
    let e = a * (1.0 - lfsm.hurst());
    let factor = (k.abs().powf(a) * (1.0 + a * k) / (e * tol)).powf(1.0 / e);
    let t = n as f64 * factor.max(1.0);
    if !t.is_finite() || t > 1e250 {
        return Err(Error::config(format!(
            "tail tolerance {tol:e} unattainable: left horizon overflows for H = {}",
            lfsm.hurst()
        )));
    }
    Ok(t)
}

/// Riemann-sum LFSM path at `t = 0..=n`. The control measure is cut into
/// uniform cells on `[−T_near, n]` (handled by FFT convolution) and geometric
/// cells on `[−T_far, −T_near]`.
pub fn synth_lfsm_path(lfsm: &LfsmSpec, cfg: &SynthesisConfig) -> Result<Vec<f64>> {
    PathSynth::new(lfsm, cfg)?.generate(cfg.stream)
}

/// Reusable path generator (kernel transforms computed once).
pub struct PathSynth {
    alpha: f64,
    kappa: f64,
    n: usize,
    per_unit: usize,
    near_cells: usize,
    near_offset: usize,
    step: f64,
    convolver: FftConvolver,
    /// (distance to origin, cell width) of the geometric cells
    far_cells: Vec<(f64, f64)>,
}

impl PathSynth {
    pub fn new(lfsm: &LfsmSpec, cfg: &SynthesisConfig) -> Result<Self> {
        let per_unit = cfg.validate()?;
        let k = lfsm.kappa();
        let near_units = if k == 0.0 { 0 } else { cfg.near_horizon.ceil() as usize };
        let near_cells = (near_units + cfg.n) * per_unit;
        let step = 1.0 / per_unit as f64;
        let kernel: Vec<f64> = (0..=near_cells)
            .map(|p| if p == 0 { 0.0 } else { ((p as f64 - 0.5) * step).powf(k) })
            .collect();
        let convolver = FftConvolver::new(&kernel, near_cells);
        let mut far_cells = Vec::new();
        if k != 0.0 {
            let t_far = far_horizon(lfsm, cfg.n, cfg.tail_tol)?;
            let mut edge = near_units.max(1) as f64;
            while edge < t_far {
                let next = edge * (1.0 + cfg.far_ratio);
                far_cells.push((0.5 * (edge + next), next - edge));
                edge = next;
                if far_cells.len() > 200_000 {
                    return Err(Error::config("too many far-field cells; raise the tolerance"));
                }
            }
        }
        Ok(Self {
            alpha: lfsm.alpha(),
            kappa: k,
            n: cfg.n,
            per_unit,
            near_cells,
            near_offset: near_units * per_unit,
            step,
            convolver,
            far_cells,
        })
    }

    pub fn far_cell_count(&self) -> usize {
        self.far_cells.len()
    }

    pub fn left_horizon(&self) -> f64 {
        self.far_cells
            .last()
            .map(|(c, w)| c + 0.5 * w)
            .unwrap_or(self.near_offset as f64 * self.step)
    }

    pub fn generate(&self, stream: RngStream) -> Result<Vec<f64>> {
        let mut rng = stream.rng();
        let mut noise = vec![0.0; self.near_cells];
        fill_standard_sas(self.alpha, &mut rng, &mut noise);
        let scale = self.step.powf(1.0 / self.alpha);
        noise.iter_mut().for_each(|z| *z *= scale);
        let y = self.convolver.apply(&noise);
        let base = y[self.near_offset];
        let mut path: Vec<f64> = (0..=self.n)
            .map(|t| y[self.near_offset + t * self.per_unit] - base)
            .collect();
        if !self.far_cells.is_empty() {
            let mut z = vec![0.0; self.far_cells.len()];
            fill_standard_sas(self.alpha, &mut rng, &mut z);
            let k = self.kappa;
            for ((v, width), zi) in self.far_cells.iter().zip(&z) {
                let m = width.powf(1.0 / self.alpha) * zi;
                let vk = v.powf(k);
                for (t, x) in path.iter_mut().enumerate().skip(1) {
                    *x += m * vk * (k * (t as f64 / v).ln_1p()).exp_m1();
                }
            }
        }
        path[0] = 0.0;
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefRoute {
    Direct,
    Pyramidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub route: CoefRoute,
    pub alpha: Option<f64>,
    pub hurst: Option<f64>,
    pub family: WaveletFamily,
    pub q: usize,
    pub n: usize,
    pub counts: Vec<usize>,
    /// Control-measure cell width at the finest octave.
    pub delta: Option<f64>,
    /// Left truncation of the control measure.
    pub horizon: Option<f64>,
    pub seed: Option<RngStream>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Octave {
    pub j: u32,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoefGrid {
    pub octaves: Vec<Octave>,
    pub meta: GridMeta,
}

impl WaveletCoefGrid {
    pub fn octave(&self, j: u32) -> Option<&[f64]> {
        self.octaves.iter().find(|o| o.j == j).map(|o| o.coeffs.as_slice())
    }

    pub fn js(&self) -> Vec<u32> {
        self.octaves.iter().map(|o| o.j).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.octaves.iter().map(|o| o.coeffs.len()).collect()
    }

    /// Restriction to the octaves in `j_lo..=j_hi`.
    pub fn select(&self, j_lo: u32, j_hi: u32) -> Result<Self> {
        let octaves: Vec<Octave> = self
            .octaves
            .iter()
            .filter(|o| o.j >= j_lo && o.j <= j_hi)
            .cloned()
            .collect();
        if octaves.len() != (j_hi - j_lo + 1) as usize {
            return Err(Error::Shape(format!(
                "grid does not contain all octaves {j_lo}..={j_hi}"
            )));
        }
        let mut meta = self.meta.clone();
        meta.counts = octaves.iter().map(|o| o.coeffs.len()).collect();
        Ok(Self { octaves, meta })
    }
}

/// Wavelet coefficients as stable integrals of the exact kernel.
pub fn wavelet_coeffs_direct(
    lfsm: &LfsmSpec,
    w: &WaveletSpec,
    cfg: &SynthesisConfig,
) -> Result<WaveletCoefGrid> {
    DirectCoefs::new(lfsm, w, cfg)?.generate(cfg.stream)
}

/// Generator for direct coefficients. Octave `j` discretizes `M` in cells of
/// width `2^{j−r}`, each the union of `2^{j−j_min}` cells of a common finest
/// grid, so all octaves of one draw share the same random measure and the
/// scaling `d_{j,·} =_d 2^{j(H+½)} d_{0,·}` holds exactly.
pub struct DirectCoefs {
    alpha: f64,
    hurst: f64,
    family: WaveletFamily,
    q: usize,
    n: usize,
    j_min: u32,
    r: u32,
    p_lo: i64,
    p_hi: i64,
    counts: Vec<usize>,
    convolvers: Vec<FftConvolver>,
    fine_cells: usize,
}

impl DirectCoefs {
    pub fn new(lfsm: &LfsmSpec, w: &WaveletSpec, cfg: &SynthesisConfig) -> Result<Self> {
        cfg.validate()?;
        let hk = HKernel::new(lfsm, w);
        let r = cfg.cells_log2;
        if r > 10 {
            return Err(Error::config("coefficient resolution must be at most 2^10 cells"));
        }
        let per = 1i64 << r;
        let support = (2 * w.q - 1) as i64;
        let p_lo = -support * per + 1;
        let p_hi = match hk.truncation(lfsm.alpha(), cfg.tail_tol)? {
            Some(x) => (x * per as f64).ceil() as i64,
            None => 0,
        };
        let table: Vec<f64> = (p_lo..=p_hi)
            .map(|p| hk.eval((p as f64 - 0.5) / per as f64))
            .collect();
        let mut counts = Vec::new();
        let mut convolvers = Vec::new();
        for j in cfg.j_min..=cfg.j_max {
            let nj = octave_count(cfg.n, w.q, j);
            if nj == 0 {
                return Err(Error::config(format!(
                    "path length {} leaves no border-free coefficients at octave {j}",
                    cfg.n
                )));
            }
            let gain = 2f64.powf(j as f64 * (lfsm.kappa() + 0.5));
            let kernel: Vec<f64> = table.iter().map(|v| v * gain).collect();
            counts.push(nj);
            convolvers.push(FftConvolver::new(&kernel, Self::signal_len(nj, per, p_lo, p_hi)));
        }
        // finest grid spans u ∈ [−p_hi 2^{j_max−r}, n]
        let left = p_hi << cfg.j_max;
        let fine_cells = ((left + ((cfg.n as i64) << r)) >> cfg.j_min) as usize;
        Ok(Self {
            alpha: lfsm.alpha(),
            hurst: lfsm.hurst(),
            family: w.family,
            q: w.q,
            n: cfg.n,
            j_min: cfg.j_min,
            r,
            p_lo,
            p_hi,
            counts,
            convolvers,
            fine_cells,
        })
    }

    fn signal_len(nj: usize, per: i64, p_lo: i64, p_hi: i64) -> usize {
        ((nj as i64 - 1) * per - p_lo + p_hi + 1) as usize
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn fine_cells(&self) -> usize {
        self.fine_cells
    }

    /// Left truncation of the control measure at the coarsest octave.
    pub fn horizon(&self) -> f64 {
        let j_max = self.j_min + self.counts.len() as u32 - 1;
        (self.p_hi as f64) * 2f64.powi(j_max as i32 - self.r as i32)
    }

    pub fn generate(&self, stream: RngStream) -> Result<WaveletCoefGrid> {
        let per = 1i64 << self.r;
        let mut rng = stream.rng();
        let mut cells = vec![0.0; self.fine_cells];
        fill_standard_sas(self.alpha, &mut rng, &mut cells);
        let width = 2f64.powi(self.j_min as i32 - self.r as i32);
        let s = width.powf(1.0 / self.alpha);
        cells.iter_mut().for_each(|c| *c *= s);
        let j_max = self.j_min + self.counts.len() as u32 - 1;
        let mut octaves = Vec::with_capacity(self.counts.len());
        for (idx, conv) in self.convolvers.iter().enumerate() {
            let j = self.j_min + idx as u32;
            if idx > 0 {
                cells = cells.chunks(2).map(|c| c.iter().sum()).collect();
            }
            let nj = self.counts[idx];
            // cell m of octave j sits at index m + p_hi·2^{j_max−j}
            let offset = self.p_hi << (j_max - j);
            let start = (offset - self.p_hi) as usize;
            let len = Self::signal_len(nj, per, self.p_lo, self.p_hi);
            let y = conv.apply(&cells[start..start + len]);
            let coeffs = (0..nj as i64)
                .map(|k| y[(k * per - self.p_lo + self.p_hi) as usize])
                .collect();
            octaves.push(Octave { j, coeffs });
        }
        Ok(WaveletCoefGrid {
            meta: GridMeta {
                route: CoefRoute::Direct,
                alpha: Some(self.alpha),
                hurst: Some(self.hurst),
                family: self.family,
                q: self.q,
                n: self.n,
                counts: self.counts.clone(),
                delta: Some(width),
                horizon: Some(self.horizon()),
                seed: Some(stream),
            },
            octaves,
        })
    }
}

/// Discretization of the pair `(d_{j,n}, d_{k,0})` on midpoints of cells of
/// width `2^{j−r}`, truncated where the α-mass of `h` drops below `tail_tol`.
pub fn scale_kernel_pair(
    lfsm: &LfsmSpec,
    w: &WaveletSpec,
    j: u32,
    k: u32,
    n: i64,
    cells_log2: u32,
    tail_tol: f64,
) -> Result<KernelPair> {
    if j > k {
        return Err(Error::param("scale pair requires j ≤ k"));
    }
    let hk = HKernel::new(lfsm, w);
    let x = hk.truncation(lfsm.alpha(), tail_tol)?.unwrap_or(0.0);
    let support = hk.support();
    let (cj, ck) = (2f64.powi(j as i32), 2f64.powi(k as i32));
    let step = cj / 2f64.powi(cells_log2 as i32);
    let hi = (cj * (n as f64 + support)).max(ck * support);
    let lo = (-ck * x).min(cj * (n as f64 - x)).min(hi - step);
    let cells = ((hi - lo) / step).ceil() as usize;
    let gj = cj.powf(hk.kappa() + 0.5);
    let gk = ck.powf(hk.kappa() + 0.5);
    let mut fv = Vec::new();
    let mut gv = Vec::new();
    for i in 0..cells {
        let u = lo + (i as f64 + 0.5) * step;
        let a = gj * hk.eval(n as f64 - u / cj);
        let b = gk * hk.eval(-u / ck);
        if a != 0.0 || b != 0.0 {
            fv.push(a);
            gv.push(b);
        }
    }
    let mass = vec![step; fv.len()];
    KernelPair::new(
        DiscreteKernel::new(mass.clone(), fv)?,
        DiscreteKernel::new(mass, gv)?,
        lfsm.alpha(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depmeas::{m1, m2};
    use crate::stats::quantile;
    use crate::wavelet::build_wavelet;

    fn db2() -> WaveletSpec {
        build_wavelet(WaveletFamily::Daubechies, 2, 10).unwrap()
    }

    fn haar() -> WaveletSpec {
        build_wavelet(WaveletFamily::Haar, 1, 10).unwrap()
    }

    #[test]
    fn kappa_and_condition() {
        let s = LfsmSpec::new(1.5, 0.7).unwrap();
        assert!((s.kappa() - 1.0 / 30.0).abs() < 1e-15);
        assert!(LfsmSpec::new(1.5, 1.2).is_err());
        assert!(LfsmSpec::new(2.0, 0.5).is_err());
        let ok = moment_condition(1.6, 0.7, 2);
        assert!(ok.satisfied);
        assert!((ok.threshold - 1.0 / 0.96).abs() < 1e-12);
        assert!(!moment_condition(1.5, 0.7, 2).satisfied);
    }

    #[test]
    fn octave_counts() {
        assert_eq!(octave_count(16384, 2, 1), 8189);
        assert_eq!(octave_count(16384, 2, 5), 509);
        assert_eq!(octave_count(16384, 1, 3), 2047);
        assert_eq!(octave_count(8, 2, 2), 0);
    }

    #[test]
    fn haar_closed_form_values() {
        let s = LfsmSpec::new(1.5, 0.2 + 1.0 / 1.5).unwrap();
        let v = h_kernel(&s, &haar(), 0.0);
        assert!((v - (2.0 * 0.5f64.powf(1.2) - 1.0) / 1.2).abs() < 1e-12);
        assert!((v + 0.107_875).abs() < 1e-6);
        let zero = LfsmSpec::new(1.5, 1.0 / 1.5).unwrap();
        for x in [0.0, 0.3, 5.0, 100.0] {
            assert!(h_kernel(&zero, &haar(), x).abs() < 1e-14);
        }
        for x in [-1.0, -2.0, -7.5] {
            assert_eq!(h_kernel(&s, &haar(), x), 0.0);
        }
        assert_eq!(h_kernel(&s, &db2(), -3.0), 0.0);
    }

    #[test]
    fn piecewise_quadrature_matches_haar_closed_form() {
        let w = haar();
        for (alpha, hurst) in [(1.5, 0.7), (1.6, 0.3), (1.2, 0.95)] {
            let s = LfsmSpec::new(alpha, hurst).unwrap();
            let hk = HKernel::new(&s, &w);
            for i in 0..=408 {
                let x = -2.0 + i as f64 * 0.25;
                let exact = haar_h(s.kappa(), x);
                let quad = hk.quadrature(x);
                let scale = exact.abs().max(1e-300);
                assert!(
                    (quad - exact).abs() <= 1e-8 * scale || (quad - exact).abs() < 1e-15,
                    "x={x}: {quad} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn series_agrees_with_quadrature() {
        let s = LfsmSpec::new(1.6, 0.7).unwrap();
        let hk = HKernel::new(&s, &db2());
        for x in [24.0, 30.0, 60.0, 200.0] {
            let a = hk.series(x);
            let b = hk.quadrature(x);
            assert!((a - b).abs() < 1e-7 * a.abs(), "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn decay_slopes() {
        let s = LfsmSpec::new(1.5, 0.7).unwrap();
        let (slope, _) = h_decay_fit(&s, &haar(), 10.0, 1e3).unwrap();
        assert!((slope - (s.kappa() - 1.0)).abs() < 0.1, "{slope}");
        let (slope, _) = h_decay_fit(&s, &db2(), 10.0, 1e3).unwrap();
        assert!((slope - (s.kappa() - 2.0)).abs() < 0.1, "{slope}");
        let zero = LfsmSpec::new(1.5, 1.0 / 1.5).unwrap();
        assert!(matches!(
            h_decay_fit(&zero, &haar(), 10.0, 1e3),
            Err(Error::Diagnostics(_))
        ));
    }

    #[test]
    fn path_starts_at_zero_and_is_deterministic() {
        let s = LfsmSpec::new(1.6, 0.7).unwrap();
        let cfg = SynthesisConfig::new(256, 1, 3, RngStream::new(3, 0));
        let a = synth_lfsm_path(&s, &cfg).unwrap();
        let b = synth_lfsm_path(&s, &cfg).unwrap();
        assert_eq!(a.len(), 257);
        assert_eq!(a[0], 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn levy_motion_has_independent_increments() {
        // κ = 0: X is a cumulative sum of the cell masses
        let s = LfsmSpec::new(1.5, 1.0 / 1.5).unwrap();
        let mut cfg = SynthesisConfig::new(64, 1, 2, RngStream::new(5, 0));
        cfg.step = 0.5;
        let synth = PathSynth::new(&s, &cfg).unwrap();
        assert_eq!(synth.far_cell_count(), 0);
        let path = synth.generate(cfg.stream).unwrap();
        let mut rng = cfg.stream.rng();
        let mut z = vec![0.0; 128];
        fill_standard_sas(1.5, &mut rng, &mut z);
        let sc = 0.5f64.powf(1.0 / 1.5);
        let x10: f64 = z[..20].iter().map(|v| v * sc).sum();
        assert!((path[10] - x10).abs() < 1e-9 * (1.0 + x10.abs()));
    }

    #[test]
    fn path_self_similarity() {
        let s = LfsmSpec::new(1.5, 0.7).unwrap();
        let cfg = SynthesisConfig::new(1024, 1, 3, RngStream::new(11, 0));
        let synth = PathSynth::new(&s, &cfg).unwrap();
        let mut full = Vec::new();
        let mut half = Vec::new();
        for r in 0..200 {
            let p = synth.generate(cfg.stream.child(r)).unwrap();
            full.push(p[1024].abs());
            half.push(p[512].abs());
        }
        let ratio = quantile(&full, 0.5) / quantile(&half, 0.5);
        let target = 2f64.powf(0.7);
        assert!((ratio / target - 1.0).abs() < 0.1, "{ratio} vs {target}");
    }

    #[test]
    fn far_horizon_overflow_is_a_config_error() {
        let s = LfsmSpec::new(1.05, 0.999).unwrap();
        assert!(matches!(far_horizon(&s, 1024, 1e-6), Err(Error::Config(_))));
    }

    #[test]
    fn direct_coefficients_scale() {
        let s = LfsmSpec::new(1.6, 0.7).unwrap();
        let w = db2();
        let cfg = SynthesisConfig::new(4096, 1, 4, RngStream::new(21, 0));
        let gen = DirectCoefs::new(&s, &w, &cfg).unwrap();
        assert_eq!(gen.counts(), &[2045, 1021, 509, 253]);
        let mut means = vec![0.0; 4];
        let reps = 20;
        for r in 0..reps {
            let g = gen.generate(cfg.stream.child(r)).unwrap();
            for (m, o) in means.iter_mut().zip(&g.octaves) {
                *m += o.coeffs.iter().map(|d| d.abs().log2()).sum::<f64>()
                    / o.coeffs.len() as f64
                    / reps as f64;
            }
        }
        let pts: Vec<(f64, f64)> = means.iter().enumerate().map(|(i, m)| (i as f64, *m)).collect();
        let (slope, _) = crate::stats::ols_slope(&pts);
        assert!((slope - 1.2).abs() < 0.05, "{slope}");
    }

    #[test]
    fn haar_levy_coefficients_are_uncorrelated() {
        let s = LfsmSpec::new(1.5, 1.0 / 1.5).unwrap();
        let w = haar();
        let cfg = SynthesisConfig::new(8192, 1, 1, RngStream::new(2, 0));
        let g = wavelet_coeffs_direct(&s, &w, &cfg).unwrap();
        let y: Vec<f64> = g.octaves[0].coeffs.iter().map(|d| d.abs().log2()).collect();
        let c = crate::stats::covariance(&y[..y.len() - 2], &y[2..]);
        let v = crate::stats::variance(&y);
        assert!(c.abs() < 4.0 * v / (y.len() as f64).sqrt(), "{c} vs {v}");
    }

    #[test]
    fn scale_pair_trivial_cases() {
        let s = LfsmSpec::new(1.6, 0.7).unwrap();
        let p = scale_kernel_pair(&s, &db2(), 1, 1, 0, 3, 1e-6).unwrap();
        let fm = p.f_mass();
        assert!((m2(&p) - fm).abs() < 1e-12 * fm);
        let levy = LfsmSpec::new(1.6, 1.0 / 1.6).unwrap();
        let p = scale_kernel_pair(&levy, &haar(), 2, 2, 3, 3, 1e-6).unwrap();
        assert_eq!(m2(&p), 0.0);
        assert_eq!(m1(&p).unwrap(), 0.0);
    }

    #[test]
    fn scale_pair_refines() {
        let s = LfsmSpec::new(1.6, 0.7).unwrap();
        let w = db2();
        let coarse = scale_kernel_pair(&s, &w, 1, 2, 0, 4, 1e-6).unwrap();
        let fine = scale_kernel_pair(&s, &w, 1, 2, 0, 5, 1e-7).unwrap();
        let (a1, b1) = (m1(&coarse).unwrap(), m1(&fine).unwrap());
        let (a2, b2) = (m2(&coarse), m2(&fine));
        assert!((a1 - b1).abs() < 1e-3 * b1.abs(), "{a1} {b1}");
        assert!((a2 - b2).abs() < 1e-3 * b2.abs(), "{a2} {b2}");
    }
}
