//! Central limit theorem for functionals of stable moving averages and the
//! lag-covariance bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{row_from, FunctionalSpec, McReport, SampleRecord, Verdict};
use crate::conv::FftConvolver;
use crate::depmeas::{check_summability, estimate_eps1, estimate_eps2, m1, m2, ma_kernel_pair, MovingAverageSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stable::{fill_standard_sas, sample_sas, StableParams};
use crate::stats::{mean, pairwise_sum};

/// Law of a single `ξₙ` of the discretized moving average.
pub fn ma_marginal(spec: &MovingAverageSpec) -> Result<StableParams> {
    let (_, w) = spec.weights();
    let mass: f64 = w.iter().map(|a| a.abs().powf(spec.alpha)).sum::<f64>() * spec.step;
    StableParams::new(spec.alpha, mass.powf(1.0 / spec.alpha))
}

/// `E K(ξ)` by plain Monte Carlo, with a standard error from 100 batches.
pub fn centered_mean_k(
    marginal: StableParams,
    k: FunctionalSpec,
    n_mc: usize,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if n_mc < 100 {
        return Err(Error::param("at least 100 draws are needed"));
    }
    let x = sample_sas(marginal, stream, n_mc)?;
    let kx = k.apply_all(&x)?;
    let batch = n_mc / 100;
    let means: Vec<f64> = kx.chunks(batch).take(100).map(mean).collect();
    let (_, se) = crate::stats::batch_mean_se(&means);
    Ok((mean(&kx), se))
}

/// FFT-based simulator of `ξ₀, …, ξ_{n−1}`: cell masses of width Δ
/// convolved with the weights `a((q − ½)Δ)`.
pub(crate) struct MaSim {
    alpha: f64,
    step: f64,
    per: usize,
    len: usize,
    n: usize,
    convolver: FftConvolver,
}

impl MaSim {
    pub(crate) fn new(spec: &MovingAverageSpec, n: usize) -> Result<Self> {
        let per = (1.0 / spec.step).round();
        if (1.0 / spec.step - per).abs() > 1e-9 {
            return Err(Error::config("moving-average simulation needs Δ = 1/m"));
        }
        if n == 0 {
            return Err(Error::param("sequence length must be positive"));
        }
        let per = per as usize;
        let (_, w) = spec.weights();
        let len = w.len();
        Ok(Self {
            alpha: spec.alpha,
            step: spec.step,
            per,
            len,
            n,
            convolver: FftConvolver::new(&w, (n - 1) * per + len),
        })
    }

    pub(crate) fn generate(&self, stream: RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        let cells = (self.n - 1) * self.per + self.len;
        let mut z = vec![0.0; cells];
        fill_standard_sas(self.alpha, &mut rng, &mut z);
        let s = self.step.powf(1.0 / self.alpha);
        z.iter_mut().for_each(|v| *v *= s);
        let y = self.convolver.apply(&z);
        (0..self.n).map(|t| y[t * self.per + self.len - 1]).collect()
    }
}

/// One path `ξ₀, …, ξ_{n−1}`.
pub fn simulate_ma_paths(spec: &MovingAverageSpec, n: usize, stream: RngStream) -> Result<Vec<f64>> {
    Ok(MaSim::new(spec, n)?.generate(stream))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltRunConfig {
    pub ma: MovingAverageSpec,
    pub functional: FunctionalSpec,
    pub n_values: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub lag_cap: usize,
}

impl CltRunConfig {
    fn validate(&self) -> Result<()> {
        self.functional.validate(self.ma.alpha)?;
        if self.n_values.is_empty() || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("N values must be non-empty and strictly increasing"));
        }
        if self.replicates < 50 {
            return Err(Error::config("at least 50 replicates are required"));
        }
        if self.lag_cap < 4 {
            return Err(Error::config("series lag cap must be at least 4"));
        }
        if self.lag_cap >= *self.n_values.last().unwrap() {
            return Err(Error::config("series lag cap must be below the largest N"));
        }
        Ok(())
    }
}

/// Truncated `Var K(ξ₀) + 2 Σ_{n=1}^{L} Cov(K(ξ₀), K(ξₙ))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub value: f64,
    pub lag_cap: usize,
    pub autocov: Vec<f64>,
    pub partial: Vec<f64>,
    /// Mean |γ| over the last quarter of lags is below that of the second quarter.
    pub tail_decreasing: bool,
}

fn centred_paths(cfg: &CltRunConfig) -> Result<(Vec<Vec<f64>>, f64)> {
    let n_max = *cfg.n_values.last().unwrap();
    let sim = MaSim::new(&cfg.ma, n_max)?;
    let base = RngStream::new(cfg.seed, 0);
    let ks: Vec<Vec<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| cfg.functional.apply_all(&sim.generate(base.child(r as u64))))
        .collect::<Result<_>>()?;
    let means: Vec<f64> = ks.iter().map(|k| mean(k)).collect();
    let m = mean(&means);
    let centred = ks
        .into_iter()
        .map(|k| k.into_iter().map(|x| x - m).collect())
        .collect();
    Ok((centred, m))
}

fn series_from(paths: &[Vec<f64>], lag_cap: usize) -> SeriesReport {
    let autocov: Vec<f64> = (0..=lag_cap)
        .map(|l| {
            let per_path: Vec<f64> = paths
                .iter()
                .map(|x| {
                    let prods: Vec<f64> = x.iter().zip(&x[l..]).map(|(a, b)| a * b).collect();
                    pairwise_sum(&prods)
                })
                .collect();
            let count: usize = paths.iter().map(|x| x.len() - l).sum();
            pairwise_sum(&per_path) / count as f64
        })
        .collect();
    let mut acc = 0.0;
    let partial: Vec<f64> = autocov
        .iter()
        .enumerate()
        .map(|(l, g)| {
            acc += if l == 0 { *g } else { 2.0 * g };
            acc
        })
        .collect();
    let q = lag_cap / 4;
    let avg = |r: std::ops::Range<usize>| {
        let n = r.len().max(1) as f64;
        autocov[r].iter().map(|g| g.abs()).sum::<f64>() / n
    };
    let tail_decreasing = avg(3 * q + 1..lag_cap + 1) <= avg(q + 1..2 * q + 1);
    SeriesReport {
        value: acc,
        lag_cap,
        autocov,
        partial,
        tail_decreasing,
    }
}

pub fn sigma2_series(cfg: &CltRunConfig) -> Result<SeriesReport> {
    cfg.validate()?;
    let (paths, _) = centred_paths(cfg)?;
    Ok(series_from(&paths, cfg.lag_cap))
}

/// Distribution of `N^{−1/2} Σ_{n<N} (K(ξₙ) − E K)` for each `N`, using every
/// disjoint window of the simulated paths, plus the truncated series for
/// the limiting variance.
pub fn run_clt_mc(cfg: &CltRunConfig) -> Result<McReport> {
    let start = std::time::Instant::now();
    cfg.validate()?;
    let mut report = McReport::new("clt", cfg.seed, cfg);
    let summ = check_summability(&cfg.ma, 256)?;
    if !summ.all_hold {
        report.hypothesis_met = false;
        report.banners.push("hypothesis unmet: kernel summability conditions fail".into());
    }
    let (paths, ek) = centred_paths(cfg)?;
    let mut variances = Vec::new();
    for &n in &cfg.n_values {
        let mut z = Vec::new();
        for (r, x) in paths.iter().enumerate() {
            for (w, win) in x.chunks_exact(n).enumerate() {
                let v = pairwise_sum(win) / (n as f64).sqrt();
                if w == 0 {
                    report.samples.push(SampleRecord {
                        config_id: format!("N{n}"),
                        replicate: r,
                        n,
                        statistic: "normalized_sum".into(),
                        value: v,
                    });
                }
                z.push(v);
            }
        }
        let second: Vec<f64> = z.iter().map(|v| v * v).collect();
        let var_n = mean(&second);
        let mut row = row_from(format!("N={n}"), Some(n), &z, true);
        row.extra.insert("var_normalized".into(), var_n);
        row.extra.insert("windows".into(), z.len() as f64);
        variances.push(var_n);
        report.rows.push(row);
    }
    let series = series_from(&paths, cfg.lag_cap);
    let mut srow = row_from("series", None, &series.autocov, false);
    srow.extra.insert("sigma2_series".into(), series.value);
    srow.extra.insert("mean_k".into(), ek);
    srow.extra.insert("tail_decreasing".into(), f64::from(u8::from(series.tail_decreasing)));
    report.rows.push(srow);

    let last = report.rows[cfg.n_values.len() - 1].ad;
    let p = last.map_or(0.0, |a| a.p_value);
    report.verdicts.push(Verdict::new("normality", p > 0.01, p, "AD p > 0.01 at the largest N"));
    if variances.len() >= 2 {
        let (a, b) = (variances[variances.len() - 2], variances[variances.len() - 1]);
        let change = (b / a - 1.0).abs();
        report.verdicts.push(
            Verdict::new("variance_stability", change < 0.15, change, "relative change < 0.15")
                .with_detail(format!("N^-1 Var(S_N): {a:.5} -> {b:.5}")),
        );
    }
    let limit = *variances.last().unwrap();
    let gap = (series.value / limit - 1.0).abs();
    report.verdicts.push(
        Verdict::new("series_match", gap < 0.2, gap, "relative gap < 0.2")
            .with_detail(format!("series {:.5} vs limit {limit:.5}", series.value)),
    );
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagBoundConfig {
    pub ma: MovingAverageSpec,
    pub k: FunctionalSpec,
    pub l: FunctionalSpec,
    pub lags: Vec<u64>,
    pub paths: usize,
    pub path_len: usize,
    pub seed: u64,
}

/// `|Ĉov(K(ξ₀), L(ξₙ))| / ([ξ₀,ξₙ]₁ + [ξ₀,ξₙ]₂)` across lags. Covariances come
/// from common paths (common random numbers across lags); lags whose
/// covariance is within 3 standard errors of zero are reported but excluded.
pub fn verify_cov_bound_lag(cfg: &LagBoundConfig) -> Result<McReport> {
    let start = std::time::Instant::now();
    cfg.k.validate(cfg.ma.alpha)?;
    cfg.l.validate(cfg.ma.alpha)?;
    let max_lag = *cfg.lags.iter().max().ok_or_else(|| Error::config("no lags given"))? as usize;
    if cfg.paths < 10 || cfg.path_len <= 2 * max_lag {
        return Err(Error::config("need at least 10 paths longer than twice the largest lag"));
    }
    let mut report = McReport::new("cov_bound_lag", cfg.seed, cfg);
    let summ = check_summability(&cfg.ma, 256)?;
    if !summ.all_hold {
        report.hypothesis_met = false;
        report.banners.push("hypothesis unmet: kernel summability conditions fail".into());
    }
    let sim = MaSim::new(&cfg.ma, cfg.path_len)?;
    let base = RngStream::new(cfg.seed, 0);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.paths)
        .into_par_iter()
        .map(|r| {
            let x = sim.generate(base.child(r as u64));
            Ok((cfg.k.apply_all(&x)?, cfg.l.apply_all(&x)?))
        })
        .collect::<Result<_>>()?;
    let mk = mean(&pairs.iter().map(|p| mean(&p.0)).collect::<Vec<_>>());
    let ml = mean(&pairs.iter().map(|p| mean(&p.1)).collect::<Vec<_>>());
    let mut resolved: Vec<(u64, f64)> = Vec::new();
    for &n in &cfg.lags {
        let l = n as usize;
        let per_path: Vec<f64> = pairs
            .iter()
            .map(|(k, lv)| {
                let prods: Vec<f64> = k.iter().zip(&lv[l..]).map(|(a, b)| (a - mk) * (b - ml)).collect();
                mean(&prods)
            })
            .collect();
        let (cov, se) = crate::stats::batch_mean_se(&per_path);
        let pair = ma_kernel_pair(&cfg.ma, n)?;
        let denom = m1(&pair)? + m2(&pair);
        let mut row = row_from(format!("lag={n}"), Some(l), &per_path, false);
        row.extra.insert("cov".into(), cov);
        row.extra.insert("se".into(), se);
        row.extra.insert("m1_plus_m2".into(), denom);
        if n >= 1 && n <= 64 && n.is_power_of_two() {
            row.extra.insert("eps1".into(), estimate_eps1(&pair));
            row.extra.insert("eps2".into(), estimate_eps2(&pair));
        }
        let noise = cov.abs() < 3.0 * se;
        row.extra.insert("below_noise_floor".into(), f64::from(u8::from(noise)));
        if denom > 0.0 && !noise {
            let ratio = cov.abs() / denom;
            row.extra.insert("ratio".into(), ratio);
            resolved.push((n, ratio));
        }
        report.rows.push(row);
    }
    if resolved.len() < 3 {
        report.verdicts.push(
            Verdict::new("ratio_stabilizes", true, resolved.len() as f64, "fewer than 3 resolved lags")
                .with_detail("covariances indistinguishable from 0 at most lags"),
        );
    } else {
        let cut = (2 * resolved.len()).div_ceil(3);
        let early = resolved[..cut].iter().map(|r| r.1).fold(0.0, f64::max);
        let late = resolved[cut..].iter().map(|r| r.1).fold(0.0, f64::max);
        let growth = if early > 0.0 { late / early } else { f64::INFINITY };
        report.verdicts.push(
            Verdict::new("ratio_stabilizes", growth <= 1.5, growth, "late/early running max ≤ 1.5")
                .with_detail(format!("{} resolved lags", resolved.len())),
        );
    }
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depmeas::KernelFn;

    #[test]
    fn indicator_average_is_iid() {
        let spec = MovingAverageSpec::with_grid(KernelFn::Indicator { lo: 0.0, hi: 1.0 }, 1.5, 0.0, 1.0, 1.0).unwrap();
        let x = simulate_ma_paths(&spec, 50, RngStream::new(4, 0)).unwrap();
        let mut rng = RngStream::new(4, 0).rng();
        let mut z = vec![0.0; 50];
        fill_standard_sas(1.5, &mut rng, &mut z);
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        assert_eq!(ma_marginal(&spec).unwrap().scale(), 1.0);
    }

    #[test]
    fn mean_k_examples() {
        let half = centered_mean_k(
            StableParams::new(1.5, 1.0).unwrap(),
            FunctionalSpec::Indicator { lo: 0.0, hi: f64::INFINITY },
            100_000,
            RngStream::new(1, 0),
        )
        .unwrap();
        assert!((half.0 - 0.5).abs() < 4.0 * half.1 + 1e-3);
        let cauchy = centered_mean_k(
            StableParams::new(1.0, 1.0).unwrap(),
            FunctionalSpec::Log2Abs,
            100_000,
            RngStream::new(2, 0),
        )
        .unwrap();
        assert!(cauchy.0.abs() < 4.0 * cauchy.1, "{cauchy:?}");
    }

    #[test]
    fn power_law_path_matches_marginal_scale() {
        let spec = MovingAverageSpec::with_grid(KernelFn::PowerLaw { p: 2.5 }, 1.5, 0.0, 1.0 / 16.0, 64.0).unwrap();
        let x = simulate_ma_paths(&spec, 20_000, RngStream::new(8, 0)).unwrap();
        let marg = ma_marginal(&spec).unwrap();
        let y = sample_sas(marg, RngStream::new(9, 0), 20_000).unwrap();
        let qx = crate::stats::quantile(&x.iter().map(|v| v.abs()).collect::<Vec<_>>(), 0.5);
        let qy = crate::stats::quantile(&y.iter().map(|v| v.abs()).collect::<Vec<_>>(), 0.5);
        assert!((qx / qy - 1.0).abs() < 0.05, "{qx} vs {qy}");
    }

    #[test]
    fn iid_series_is_the_variance() {
        let spec = MovingAverageSpec::with_grid(KernelFn::Indicator { lo: 0.0, hi: 1.0 }, 1.5, 0.0, 1.0, 1.0).unwrap();
        let cfg = CltRunConfig {
            ma: spec,
            functional: FunctionalSpec::Log2Abs,
            n_values: vec![256, 1024],
            replicates: 50,
            seed: 3,
            lag_cap: 16,
        };
        let s = sigma2_series(&cfg).unwrap();
        assert!((s.value / s.autocov[0] - 1.0).abs() < 0.1);
        assert!(s.autocov[1..].iter().all(|g| g.abs() < 0.05 * s.autocov[0]));
    }
}
