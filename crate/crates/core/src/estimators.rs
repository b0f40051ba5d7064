//! Wavelet estimators of the self-similarity parameter: the log-mean Ĥ,
//! the power-mean Ĥ* and the plug-in asymptotic variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lfsm::{moment_condition, WaveletCoefGrid};
use crate::stats::pairwise_sum;

/// Regression weights over octaves `j_min..=j_max` with `Σw = 0`, `Σjw = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionWeights {
    pub j_min: u32,
    pub j_max: u32,
    pub w: Vec<f64>,
}

impl RegressionWeights {
    pub fn js(&self) -> impl Iterator<Item = u32> {
        self.j_min..=self.j_max
    }

    /// Same weights attached to octaves shifted by `c`. The identities are
    /// preserved because `Σw = 0`.
    pub fn shifted(&self, c: u32) -> Self {
        Self {
            j_min: self.j_min + c,
            j_max: self.j_max + c,
            w: self.w.clone(),
        }
    }
}

/// Least-squares slope weights; with `variance_hints` the fit is weighted by
/// the inverse variances of the ordinates.
pub fn ols_weights(j_min: u32, j_max: u32, variance_hints: Option<&[f64]>) -> Result<RegressionWeights> {
    if j_max <= j_min {
        return Err(Error::param("regression needs at least two octaves"));
    }
    let m = (j_max - j_min + 1) as usize;
    let prec: Vec<f64> = match variance_hints {
        None => vec![1.0; m],
        Some(v) => {
            if v.len() != m {
                return Err(Error::Shape(format!("{} variance hints for {m} octaves", v.len())));
            }
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::param("variance hints must be positive and finite"));
            }
            v.iter().map(|x| 1.0 / x).collect()
        }
    };
    let js: Vec<f64> = (j_min..=j_max).map(f64::from).collect();
    let sp: f64 = prec.iter().sum();
    let jbar = prec.iter().zip(&js).map(|(p, j)| p * j).sum::<f64>() / sp;
    let sxx: f64 = prec.iter().zip(&js).map(|(p, j)| p * (j - jbar).powi(2)).sum();
    let w = prec.iter().zip(&js).map(|(p, j)| p * (j - jbar) / sxx).collect();
    Ok(RegressionWeights { j_min, j_max, w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Log,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    #[serde(rename = "H_hat")]
    pub h_hat: f64,
    pub j: Vec<u32>,
    #[serde(rename = "Y")]
    pub y: Vec<f64>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub w: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sigma2_hat: Option<f64>,
    pub warnings: Vec<String>,
}

fn octave_data<'a>(grid: &'a WaveletCoefGrid, w: &RegressionWeights) -> Result<Vec<&'a [f64]>> {
    let mut out = Vec::with_capacity(w.w.len());
    for j in w.js() {
        let d = grid
            .octave(j)
            .ok_or_else(|| Error::Shape(format!("grid has no octave {j} required by the weights")))?;
        if d.is_empty() {
            return Err(Error::data(format!("octave {j} has no coefficients")));
        }
        if let Some(pos) = d.iter().position(|x| *x == 0.0 || !x.is_finite()) {
            return Err(Error::data(format!(
                "coefficient d[{j},{pos}] = {} has no finite logarithm",
                d[pos]
            )));
        }
        out.push(d);
    }
    Ok(out)
}

fn condition_warnings(grid: &WaveletCoefGrid, alpha: Option<f64>, h: f64) -> Vec<String> {
    let alpha = alpha.or(grid.meta.alpha);
    let hurst = grid.meta.hurst.unwrap_or(h);
    match alpha {
        Some(a) if a > 1.0 && a < 2.0 => {
            let c = moment_condition(a, hurst, grid.meta.q);
            if c.satisfied {
                Vec::new()
            } else {
                vec![format!(
                    "moment condition violated: Q − H = {:.4} ≤ 1/(α(α−1)) = {:.4}",
                    c.q_minus_h, c.threshold
                )]
            }
        }
        _ => vec!["moment condition not evaluated: α unknown".to_string()],
    }
}

/// Per-octave means of `log₂|d|`.
pub fn log_means(grid: &WaveletCoefGrid, w: &RegressionWeights) -> Result<Vec<f64>> {
    Ok(octave_data(grid, w)?
        .iter()
        .map(|d| {
            let l: Vec<f64> = d.iter().map(|x| x.abs().log2()).collect();
            pairwise_sum(&l) / l.len() as f64
        })
        .collect())
}

/// `Ĥ = Σ_j w_j mean_n log₂|d_{j,n}| − ½`.
pub fn estimate_h_log(grid: &WaveletCoefGrid, w: &RegressionWeights) -> Result<EstimateResult> {
    let y = log_means(grid, w)?;
    let h_hat = w.w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - 0.5;
    Ok(EstimateResult {
        method: Method::Log,
        beta: None,
        h_hat,
        j: w.js().collect(),
        n: octave_data(grid, w)?.iter().map(|d| d.len()).collect(),
        y,
        w: w.w.clone(),
        sigma2_hat: None,
        warnings: condition_warnings(grid, None, h_hat),
    })
}

/// `Ĥ* = β⁻¹ Σ_j w_j log₂(mean_n |d_{j,n}|^β) − ½` for `−1 < β < α/2`, `β ≠ 0`.
pub fn estimate_h_power(
    grid: &WaveletCoefGrid,
    w: &RegressionWeights,
    beta: f64,
    alpha: Option<f64>,
) -> Result<EstimateResult> {
    let alpha = alpha
        .or(grid.meta.alpha)
        .ok_or_else(|| Error::param("the power estimator needs α to check the range of β"))?;
    check_beta(beta, alpha)?;
    let data = octave_data(grid, w)?;
    let y: Vec<f64> = data
        .iter()
        .map(|d| {
            let p: Vec<f64> = d.iter().map(|x| x.abs().powf(beta)).collect();
            (pairwise_sum(&p) / p.len() as f64).log2() / beta
        })
        .collect();
    let h_hat = w.w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - 0.5;
    Ok(EstimateResult {
        method: Method::Power,
        beta: Some(beta),
        h_hat,
        j: w.js().collect(),
        n: data.iter().map(|d| d.len()).collect(),
        y,
        w: w.w.clone(),
        sigma2_hat: None,
        warnings: condition_warnings(grid, Some(alpha), h_hat),
    })
}

pub fn check_beta(beta: f64, alpha: f64) -> Result<()> {
    if !(beta > -1.0 && beta < alpha / 2.0) || beta == 0.0 {
        return Err(Error::param(format!(
            "β must satisfy −1 < β < α/2 = {} and β ≠ 0, got {beta}",
            alpha / 2.0
        )));
    }
    Ok(())
}

/// Transform applied to coefficients before covariances are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefTransform {
    Log,
    Power { beta: f64 },
}

impl CoefTransform {
    fn apply(&self, d: f64) -> f64 {
        match *self {
            CoefTransform::Log => d.abs().log2(),
            CoefTransform::Power { beta } => d.abs().powf(beta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRoute {
    /// Lagged products pooled over independent replicates, centred on the
    /// pooled per-octave mean.
    AcrossReplicates,
    /// Single path; centred on its own mean, biased for short records.
    WithinPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaJk {
    pub j: u32,
    pub k: u32,
    pub value: f64,
    pub lag_cap: usize,
    /// Partial sums `2^{(j−k)/2} Σ_{|ℓ| ≤ L'}` for increasing truncation.
    pub partial: Vec<f64>,
    pub route: SigmaRoute,
}

pub fn default_lag_cap(n_k: usize) -> usize {
    (n_k / 4).clamp(1, 32)
}

/// Plug-in `σ_{jk} = 2^{(j−k)/2} Σ_{|ℓ|≤L'} Cov(T(d_{j,ℓ}), T(d_{k,0}))` for
/// `k ≥ j`, with `L' = L·2^{k−j}` offsets at the finer octave. The power
/// transform is normalised by `(ln 2)² E|d_j|^β E|d_k|^β`.
pub fn sigma_jk_plugin(
    grids: &[WaveletCoefGrid],
    j: u32,
    k: u32,
    lag_cap: Option<usize>,
    transform: CoefTransform,
) -> Result<SigmaJk> {
    if k < j {
        let mut s = sigma_jk_plugin(grids, k, j, lag_cap, transform)?;
        s.j = j;
        s.k = k;
        return Ok(s);
    }
    if grids.is_empty() {
        return Err(Error::param("no coefficient grids supplied"));
    }
    let fetch = |g: &WaveletCoefGrid, o: u32| -> Result<Vec<f64>> {
        let d = g
            .octave(o)
            .ok_or_else(|| Error::Shape(format!("grid has no octave {o}")))?;
        if d.iter().any(|x| *x == 0.0 || !x.is_finite()) {
            return Err(Error::data(format!("octave {o} has zero or non-finite coefficients")));
        }
        Ok(d.iter().map(|x| transform.apply(*x)).collect())
    };
    let xs: Vec<Vec<f64>> = grids.iter().map(|g| fetch(g, j)).collect::<Result<_>>()?;
    let ys: Vec<Vec<f64>> = grids.iter().map(|g| fetch(g, k)).collect::<Result<_>>()?;
    let nk = ys.iter().map(|v| v.len()).min().unwrap_or(0);
    let cap = lag_cap.unwrap_or_else(|| default_lag_cap(nk));
    if cap == 0 {
        return Err(Error::param("lag cap must be at least 1"));
    }
    if nk < 2 * cap + 2 {
        return Err(Error::diag(format!(
            "octave {k} has {nk} coefficients, too few for lag cap {cap}"
        )));
    }
    let stride = 1usize << (k - j);
    let series = pooled_cross_series(&xs, &ys, stride, cap)?;
    let mut norm = 1.0;
    if let CoefTransform::Power { .. } = transform {
        norm /= std::f64::consts::LN_2.powi(2) * series.mean_x * series.mean_y;
    }
    let partial = series.partial.iter().map(|p| p * norm).collect();
    Ok(SigmaJk {
        j,
        k,
        value: norm * series.value,
        lag_cap: cap,
        partial,
        route: if grids.len() > 1 {
            SigmaRoute::AcrossReplicates
        } else {
            SigmaRoute::WithinPath
        },
    })
}

/// `s^{−1/2} Σ_{|ℓ| ≤ L·s} Cov(x_ℓ, y_0)` from replicate arrays, where `y`
/// lives on a grid `s` times coarser than `x` (`y_m` sits at `x_{m·s}`).
/// Lagged products are pooled over replicates and centred on pooled means.
pub(crate) struct CrossSeries {
    pub value: f64,
    /// Partial sums after each whole coarse-grid lag.
    pub partial: Vec<f64>,
    pub mean_x: f64,
    pub mean_y: f64,
}

pub(crate) fn pooled_cross_series(xs: &[Vec<f64>], ys: &[Vec<f64>], stride: usize, cap: usize) -> Result<CrossSeries> {
    let mean_of = |v: &[Vec<f64>]| {
        let all: Vec<f64> = v.iter().flatten().copied().collect();
        pairwise_sum(&all) / all.len() as f64
    };
    let (mx, my) = (mean_of(xs), mean_of(ys));
    let reach = (cap * stride) as i64;
    let mut by_offset = Vec::with_capacity((2 * reach + 1) as usize);
    for off in -reach..=reach {
        let mut acc = Vec::new();
        for (x, y) in xs.iter().zip(ys) {
            for (m, ym) in y.iter().enumerate() {
                let i = off + (m * stride) as i64;
                if i >= 0 && (i as usize) < x.len() {
                    acc.push((x[i as usize] - mx) * (ym - my));
                }
            }
        }
        if acc.is_empty() {
            return Err(Error::diag(format!("no data pairs at offset {off}")));
        }
        by_offset.push(pairwise_sum(&acc) / acc.len() as f64);
    }
    let norm = 1.0 / (stride as f64).sqrt();
    let centre = reach as usize;
    let mut partial = Vec::with_capacity(cap + 1);
    let mut running = 0.0;
    for l in 0..=reach as usize {
        running += if l == 0 {
            by_offset[centre]
        } else {
            by_offset[centre - l] + by_offset[centre + l]
        };
        if l % stride == 0 {
            partial.push(norm * running);
        }
    }
    Ok(CrossSeries {
        value: norm * running,
        partial,
        mean_x: mx,
        mean_y: my,
    })
}

/// Full symmetric matrix `σ_{jk}` over the octaves of `w`.
pub fn sigma_matrix(
    grids: &[WaveletCoefGrid],
    w: &RegressionWeights,
    lag_cap: Option<usize>,
    transform: CoefTransform,
) -> Result<Vec<Vec<f64>>> {
    let js: Vec<u32> = w.js().collect();
    let m = js.len();
    let mut s = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a..m {
            let v = sigma_jk_plugin(grids, js[a], js[b], lag_cap, transform)?.value;
            s[a][b] = v;
            s[b][a] = v;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma2 {
    pub value: f64,
    pub warning: Option<String>,
}

/// `σ² = Σ_{j,k} w_j w_k 2^{j/2} 2^{k/2} σ_{jk}`.
pub fn sigma2_total(sigma: &[Vec<f64>], w: &RegressionWeights) -> Result<Sigma2> {
    let m = w.w.len();
    if sigma.len() != m || sigma.iter().any(|r| r.len() != m) {
        return Err(Error::Shape(format!("σ matrix must be {m}×{m}")));
    }
    let scale: Vec<f64> = w.js().map(|j| 2f64.powf(j as f64 / 2.0)).collect();
    let mut total = 0.0;
    let mut magnitude = 0.0;
    for a in 0..m {
        for b in 0..m {
            let t = w.w[a] * w.w[b] * scale[a] * scale[b] * sigma[a][b];
            total += t;
            magnitude += t.abs();
        }
    }
    let warning = (total < -1e-12 * magnitude).then(|| {
        format!("plug-in σ² = {total:.4e} is negative: lag truncation too short or too few samples")
    });
    Ok(Sigma2 {
        value: total,
        warning,
    })
}

/// Attaches the plug-in variance to an estimate computed from `grids[0]` (or
/// from one representative grid), pooling covariances over all `grids`.
pub fn with_plugin_variance(
    mut est: EstimateResult,
    grids: &[WaveletCoefGrid],
    w: &RegressionWeights,
    lag_cap: Option<usize>,
) -> Result<EstimateResult> {
    let transform = match (est.method, est.beta) {
        (Method::Power, Some(beta)) => CoefTransform::Power { beta },
        _ => CoefTransform::Log,
    };
    let sigma = sigma_matrix(grids, w, lag_cap, transform)?;
    let mut s2 = sigma2_total(&sigma, w)?;
    if let CoefTransform::Power { beta } = transform {
        // delta method for β⁻¹ log₂(·)
        s2.value /= beta * beta;
        est.warnings
            .push("σ̂² for the power estimator is an asymptotic-normality variance only".into());
    }
    if grids.len() == 1 {
        est.warnings
            .push("σ̂² from within-path covariances; biased for short records".into());
    }
    if let Some(wn) = s2.warning {
        est.warnings.push(wn);
    }
    est.sigma2_hat = Some(s2.value.max(0.0));
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lfsm::{CoefRoute, GridMeta, Octave};
    use crate::wavelet::WaveletFamily;
    use approx::assert_abs_diff_eq;

    fn grid_from(octaves: Vec<(u32, Vec<f64>)>, alpha: Option<f64>) -> WaveletCoefGrid {
        let counts = octaves.iter().map(|o| o.1.len()).collect();
        WaveletCoefGrid {
            octaves: octaves.into_iter().map(|(j, coeffs)| Octave { j, coeffs }).collect(),
            meta: GridMeta {
                route: CoefRoute::Direct,
                alpha,
                hurst: None,
                family: WaveletFamily::Daubechies,
                q: 2,
                n: 1024,
                counts,
                delta: None,
                horizon: None,
                seed: None,
            },
        }
    }

    /// `|d_{j,n}| = 2^{(H+½)j + c}` with alternating signs.
    fn exact_grid(h: f64, c: f64, js: std::ops::RangeInclusive<u32>) -> WaveletCoefGrid {
        grid_from(
            js.map(|j| {
                let v = 2f64.powf((h + 0.5) * j as f64 + c);
                (j, (0..40).map(|n| if n % 2 == 0 { v } else { -v }).collect())
            })
            .collect(),
            Some(1.6),
        )
    }

    #[test]
    fn ols_examples() {
        let w = ols_weights(1, 3, None).unwrap();
        assert_eq!(w.w, vec![-0.5, 0.0, 0.5]);
        let w = ols_weights(1, 5, None).unwrap();
        for (a, b) in w.w.iter().zip([-0.2, -0.1, 0.0, 0.1, 0.2]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(ols_weights(2, 2, None).is_err());
        let w = ols_weights(2, 6, Some(&[0.1, 0.3, 1.0, 2.0, 7.0])).unwrap();
        assert_abs_diff_eq!(w.w.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        let sj: f64 = w.js().zip(&w.w).map(|(j, x)| j as f64 * x).sum();
        assert_abs_diff_eq!(sj, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_log_linear_grid_recovers_h() {
        let g = exact_grid(0.7, 0.3, 1..=5);
        for w in [
            ols_weights(1, 5, None).unwrap(),
            ols_weights(1, 5, Some(&[1.0, 2.0, 3.0, 4.0, 5.0])).unwrap(),
        ] {
            assert_abs_diff_eq!(estimate_h_log(&g, &w).unwrap().h_hat, 0.7, epsilon = 1e-12);
            let p = estimate_h_power(&g, &w, 0.4, None).unwrap();
            assert_abs_diff_eq!(p.h_hat, 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaling_the_grid_leaves_estimates_unchanged() {
        let raw: Vec<(u32, Vec<f64>)> = (1..=4)
            .map(|j| (j, (1..50).map(|n| ((n * j) as f64).sin() * j as f64).collect()))
            .collect();
        let g = grid_from(raw.clone(), Some(1.5));
        let scaled = grid_from(
            raw.into_iter()
                .map(|(j, d)| (j, d.into_iter().map(|x| 3.7 * x).collect()))
                .collect(),
            Some(1.5),
        );
        let w = ols_weights(1, 4, None).unwrap();
        let a = estimate_h_log(&g, &w).unwrap().h_hat;
        let b = estimate_h_log(&scaled, &w).unwrap().h_hat;
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        let a = estimate_h_power(&g, &w, -0.3, None).unwrap().h_hat;
        let b = estimate_h_power(&scaled, &w, -0.3, None).unwrap().h_hat;
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn errors_and_warnings() {
        let mut g = exact_grid(0.7, 0.0, 1..=3);
        let w = ols_weights(1, 3, None).unwrap();
        assert!(matches!(
            estimate_h_power(&g, &w, 0.9, Some(1.6)),
            Err(Error::Parameter(_))
        ));
        assert!(estimate_h_power(&g, &w, 0.0, Some(1.6)).is_err());
        let w4 = ols_weights(1, 4, None).unwrap();
        assert!(matches!(estimate_h_log(&g, &w4), Err(Error::Shape(_))));
        g.meta.alpha = Some(1.5);
        let e = estimate_h_log(&g, &w).unwrap();
        assert_eq!(e.warnings.len(), 1);
        g.meta.alpha = Some(1.6);
        assert!(estimate_h_log(&g, &w).unwrap().warnings.is_empty());
        g.octaves[1].coeffs[3] = 0.0;
        assert!(matches!(estimate_h_log(&g, &w), Err(Error::Data(_))));
    }

    #[test]
    fn json_schema() {
        let g = exact_grid(0.7, 0.0, 1..=3);
        let w = ols_weights(1, 3, None).unwrap();
        let e = estimate_h_log(&g, &w).unwrap();
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        for key in ["method", "H_hat", "Y", "N", "w", "warnings"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("beta").is_none());
        assert_eq!(v["method"], "log");
    }

    #[test]
    fn sigma_for_independent_coefficients() {
        use crate::rng::RngStream;
        use crate::stable::sample_sas;
        use crate::stable::StableParams;
        let grids: Vec<WaveletCoefGrid> = (0..20)
            .map(|r| {
                let s = RngStream::new(9, r);
                let d1 = sample_sas(StableParams::new(1.5, 1.0).unwrap(), s.child(1), 400).unwrap();
                let d2 = sample_sas(StableParams::new(1.5, 2.0).unwrap(), s.child(2), 200).unwrap();
                grid_from(vec![(1, d1), (2, d2)], Some(1.5))
            })
            .collect();
        let s11 = sigma_jk_plugin(&grids, 1, 1, Some(8), CoefTransform::Log).unwrap();
        let v: Vec<f64> = grids
            .iter()
            .flat_map(|g| g.octave(1).unwrap().iter().map(|d| d.abs().log2()))
            .collect();
        let var = crate::stats::variance(&v);
        assert!((s11.value - var).abs() < 0.15 * var, "{} vs {var}", s11.value);
        assert_eq!(s11.route, SigmaRoute::AcrossReplicates);
        let s12 = sigma_jk_plugin(&grids, 1, 2, Some(8), CoefTransform::Log).unwrap();
        let s21 = sigma_jk_plugin(&grids, 2, 1, Some(8), CoefTransform::Log).unwrap();
        assert_eq!(s12.value, s21.value);
        assert!(s12.value.abs() < 0.2 * var);
    }

    #[test]
    fn sigma2_arithmetic() {
        let w = ols_weights(1, 2, None).unwrap();
        let s = vec![vec![2.0, 0.0], vec![0.0, 3.0]];
        let t = sigma2_total(&s, &w).unwrap();
        assert_abs_diff_eq!(t.value, 2.0 * 2.0 + 4.0 * 3.0, epsilon = 1e-12);
        let z = sigma2_total(&[vec![0.0; 2], vec![0.0; 2]], &w).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(sigma2_total(&[vec![1.0]], &w).is_err());
        let neg = sigma2_total(&[vec![-1.0, 0.0], vec![0.0, -1.0]], &w).unwrap();
        assert!(neg.warning.is_some());
    }

    #[test]
    fn sigma2_scales_under_octave_shift() {
        let w = ols_weights(1, 4, None).unwrap();
        let s: Vec<Vec<f64>> = (0..4)
            .map(|a| (0..4).map(|b| 1.0 / (1.0 + (a as f64 - b as f64).abs())).collect())
            .collect();
        let base = sigma2_total(&s, &w).unwrap().value;
        for c in 1..4 {
            let shifted = sigma2_total(&s, &w.shifted(c)).unwrap().value;
            assert_abs_diff_eq!(shifted, 2f64.powi(c as i32) * base, epsilon = 1e-12 * shifted.abs());
        }
    }
}
