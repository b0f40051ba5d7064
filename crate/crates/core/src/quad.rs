//! Numerical quadrature: globally adaptive Gauss–Kronrod (7/15) with maps that
//! neutralize algebraic endpoint singularities and algebraic tails, plus the
//! composite midpoint rule used for kernel discretization.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = h * x;
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive integration of `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    intervals.push((a, b, v, e));
    let mut evals = 15;
    loop {
        let total: f64 = intervals.iter().map(|i| i.2).sum();
        let err: f64 = intervals.iter().map(|i| i.3).sum();
        if !total.is_finite() {
            return Err(Error::diag("quadrature produced a non-finite value"));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(QuadResult {
                value: total,
                error: err,
                evaluations: evals,
            });
        }
        if intervals.len() >= max_intervals {
            return Err(Error::diag(format!(
                "quadrature did not converge: estimate {total:.6e}, error {err:.3e} after {} intervals",
                intervals.len()
            )));
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::diag("quadrature interval underflow"));
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evals += 30;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Integrates `f` over `[a, b]` when `f` behaves like `(x−a)^{ga}` near `a` and
/// `(b−x)^{gb}` near `b` (exponents in (−1, 0]). Each half of the interval is
/// mapped by `x = end ± half·t^{1/(1+γ)}`, which cancels the singular factor.
pub fn integrate_endpoint_singular(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    ga: f64,
    gb: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    if !(ga > -1.0 && gb > -1.0) {
        return Err(Error::param("endpoint exponents must exceed -1"));
    }
    let m = 0.5 * (a + b);
    let half = m - a;
    let pa = 1.0 / (1.0 + ga);
    let pb = 1.0 / (1.0 + gb);
    let left = integrate(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = a + half * t.powf(pa);
            f(x) * half * pa * t.powf(pa - 1.0)
        },
        0.0,
        1.0,
        abs_tol / 2.0,
        rel_tol,
        2000,
    )?;
    let right = integrate(
        |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            let x = b - half * t.powf(pb);
            f(x) * half * pb * t.powf(pb - 1.0)
        },
        0.0,
        1.0,
        abs_tol / 2.0,
        rel_tol,
        2000,
    )?;
    Ok(QuadResult {
        value: left.value + right.value,
        error: left.error + right.error,
        evaluations: left.evaluations + right.evaluations,
    })
}

/// `∫_a^∞ f` for `f(x) ~ x^{−q}` with `q > 1`, via `x = a + (1 − t)/t` and an
/// endpoint map for the resulting `t^{q−2}` behaviour at `t = 0`.
pub fn integrate_semi_infinite(
    f: impl Fn(f64) -> f64,
    a: f64,
    q: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<QuadResult> {
    if !(q > 1.0) {
        return Err(Error::param("tail decay exponent must exceed 1"));
    }
    let g = move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x = a + (1.0 - t) / t;
        f(x) / (t * t)
    };
    let gamma = (q - 2.0).min(0.0);
    integrate_endpoint_singular(g, 0.0, 1.0, gamma, 0.0, abs_tol, rel_tol)
}

/// Composite midpoint rule with `n` cells.
pub fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integral() {
        let r = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-14, 1e-12, 100).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularities() {
        // ∫_0^1 x^{-1/2}(1-x)^{-0.3} dx = B(1/2, 0.7)
        let r = integrate_endpoint_singular(
            |x: f64| x.powf(-0.5) * (1.0 - x).powf(-0.3),
            0.0,
            1.0,
            -0.5,
            -0.3,
            1e-13,
            1e-11,
        )
        .unwrap();
        let exact = statrs::function::beta::beta(0.5, 0.7);
        assert!((r.value - exact).abs() < 1e-9 * exact, "{} vs {exact}", r.value);
    }

    #[test]
    fn algebraic_tail() {
        // ∫_1^∞ x^{-1.5} dx = 2
        let r = integrate_semi_infinite(|x: f64| x.powf(-1.5), 1.0, 1.5, 1e-13, 1e-11).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((midpoint(|x| x, 0.0, 2.0, 7) - 2.0).abs() < 1e-14);
    }
}
