//! Deterministic property suites over random finite kernel pairs.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{verify_lemma53, Lemma53Config, McReport, Verdict};
use crate::depmeas::{
    codifference, du_measure, dudv_measure, i_measure, lemma31_ratio, m1, m1_star, m2, representation_transform,
    square_grid, u_measure, KernelPair, Lemma31Bound,
};
use crate::error::Result;
use crate::estimators::ols_weights;
use crate::rng::{open01, RngStream};
use crate::stable::DiscreteKernel;

/// Pair with `atoms` atoms, masses in `[0.2, 2)` and values in `(−2, 2)`.
pub fn random_pair<R: Rng>(rng: &mut R, atoms: usize, alpha: f64) -> Result<KernelPair> {
    let mass: Vec<f64> = (0..atoms).map(|_| 0.2 + 1.8 * open01(rng)).collect();
    let f: Vec<f64> = (0..atoms).map(|_| 4.0 * open01(rng) - 2.0).collect();
    let g: Vec<f64> = (0..atoms).map(|_| 4.0 * open01(rng) - 2.0).collect();
    KernelPair::new(DiscreteKernel::new(mass.clone(), f)?, DiscreteKernel::new(mass, g)?, alpha)
}

/// Largest `|U|/bound` per bound over `pairs` random pairs per α on a
/// 100 × 100 grid of `[−5, 5]²`.
pub fn check_lemma31(seed: u64, pairs: usize, alphas: &[f64]) -> Result<Vec<Verdict>> {
    let grid = square_grid(-5.0, 5.0, 100);
    let mut worst = [0.0f64; 3];
    for (ai, &alpha) in alphas.iter().enumerate() {
        let mut rng = RngStream::new(seed, 100 + ai as u64).rng();
        for _ in 0..pairs {
            let p = random_pair(&mut rng, 4, alpha)?;
            for (b, w) in Lemma31Bound::ALL.iter().zip(worst.iter_mut()) {
                *w = w.max(lemma31_ratio(&p, *b, &grid));
            }
        }
    }
    Ok(Lemma31Bound::ALL
        .iter()
        .zip(worst)
        .map(|(b, w)| Verdict::new(format!("lemma31_{}", b.label()), w <= 1.0, w, "max |U|/bound ≤ 1"))
        .collect())
}

/// Central differences refined by Richardson extrapolation (step halving).
fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    const LEVELS: usize = 5;
    let mut table: Vec<f64> = (0..LEVELS).map(|i| d(h / 2f64.powi(i as i32))).collect();
    for level in 1..LEVELS {
        let factor = 4f64.powi(level as i32);
        for i in (level..LEVELS).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table[LEVELS - 1]
}

/// Worst relative error of the exact first and mixed derivatives of `U`
/// against extrapolated finite differences at `points` random points kept
/// away from the singular lines `u fᵢ + v gᵢ = 0` and the axes.
pub fn check_derivatives(seed: u64, points: usize) -> Result<Vec<Verdict>> {
    let mut rng = RngStream::new(seed, 200).rng();
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < points {
        let alpha = 1.1 + 0.8 * open01(&mut rng);
        let p = random_pair(&mut rng, 3, alpha)?;
        let u = (0.3 + 1.2 * open01(&mut rng)) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let v = (0.3 + 1.2 * open01(&mut rng)) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let gap = p
            .f()
            .value()
            .iter()
            .zip(p.g().value())
            .map(|(x, y)| (u * x + v * y).abs())
            .fold(f64::INFINITY, f64::min);
        if gap < 0.2 {
            continue;
        }
        let scale = p.f().value().iter().chain(p.g().value()).map(|x| x.abs()).fold(0.0, f64::max);
        let h = 0.05 * gap / scale;
        let exact1 = du_measure(&p, u, v)?;
        let exact2 = dudv_measure(&p, u, v)?;
        let fd1 = richardson(|s| (u_measure(&p, u + s, v) - u_measure(&p, u - s, v)) / (2.0 * s), h);
        let fd2 = richardson(
            |s| {
                (u_measure(&p, u + s, v + s) - u_measure(&p, u + s, v - s) - u_measure(&p, u - s, v + s)
                    + u_measure(&p, u - s, v - s))
                    / (4.0 * s * s)
            },
            h,
        );
        e1 = e1.max((fd1 - exact1).abs() / exact1.abs().max(1e-3));
        e2 = e2.max((fd2 - exact2).abs() / exact2.abs().max(1e-3));
        done += 1;
    }
    Ok(vec![
        Verdict::new("derivative_u", e1 <= 1e-5, e1, "relative error ≤ 1e-5"),
        Verdict::new("derivative_uv", e2 <= 1e-5, e2, "relative error ≤ 1e-5"),
    ])
}

fn invariants(p: &KernelPair) -> Result<[f64; 5]> {
    Ok([m1_star(p)?, m1(p)?, m2(p), codifference(p), i_measure(p, 0.7, -1.3)])
}

/// Worst relative change of `[·,·]₁*`, `[·,·]₁`, `[·,·]₂`, the codifference
/// and `I(0.7, −1.3)` under random changes of representation.
pub fn check_invariance(seed: u64, trials: usize) -> Result<Verdict> {
    let mut rng = RngStream::new(seed, 300).rng();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let alpha = 1.1 + 0.8 * open01(&mut rng);
        let atoms = rng.gen_range(2..=6);
        let p = random_pair(&mut rng, atoms, alpha)?;
        let h: Vec<f64> = (0..atoms)
            .map(|_| {
                let m = 10f64.powf(2.0 * open01(&mut rng) - 1.0);
                if rng.gen::<bool>() {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let mut relabel: Vec<usize> = (0..atoms).collect();
        relabel.shuffle(&mut rng);
        let q = representation_transform(&p, &h, &relabel)?;
        let (a, b) = (invariants(&p)?, invariants(&q)?);
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs() / x.abs().max(1e-300));
        }
    }
    Ok(Verdict::new("representation_invariance", worst <= 1e-10, worst, "relative change ≤ 1e-10"))
}

/// `Σ w_j = 0` and `Σ j w_j = 1` for the OLS weights over several ranges.
pub fn check_weights() -> Result<Verdict> {
    let mut worst = 0.0f64;
    for (lo, hi) in [(1, 2), (1, 5), (2, 7), (3, 12)] {
        let w = ols_weights(lo, hi, None)?;
        let s0: f64 = w.w.iter().sum();
        let s1: f64 = w.js().zip(&w.w).map(|(j, x)| j as f64 * x).sum();
        worst = worst.max(s0.abs()).max((s1 - 1.0).abs());
    }
    Ok(Verdict::new("weight_identities", worst <= 1e-12, worst, "|Σw| and |Σjw − 1| ≤ 1e-12"))
}

/// All deterministic property suites.
pub fn run_selfcheck(seed: u64) -> Result<McReport> {
    let start = std::time::Instant::now();
    let mut report = McReport::new("selfcheck", seed, &seed);
    report.verdicts.extend(check_lemma31(seed, 20, &[1.2, 1.5, 1.8])?);
    report.verdicts.extend(check_derivatives(seed, 100)?);
    report.verdicts.push(check_invariance(seed, 50)?);
    report.verdicts.push(check_weights()?);
    let l53 = verify_lemma53(&Lemma53Config {
        samples: 100_000,
        alphas: vec![0.5, 1.1, 1.5, 1.9],
        seed,
    })?;
    report.verdicts.extend(l53.verdicts);
    report.runtime_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
