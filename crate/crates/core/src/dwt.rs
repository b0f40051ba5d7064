//! Mallat filter-bank wavelet coefficients of a sampled path.
//!
//! The approximation sequence is initialised with the samples themselves,
//! `a₀[n] = X(n)`, and each level applies
//! `a_j[k] = Σ_m h_m a_{j−1}[2k+m]`, `d_j[k] = Σ_m g_m a_{j−1}[2k+m]`.
//! Only coefficients whose filters stay inside the data are kept; nothing is
//! wrapped or reflected.

use crate::error::{Error, Result};
use crate::lfsm::{octave_count, CoefRoute, GridMeta, Octave, WaveletCoefGrid};
use crate::wavelet::WaveletSpec;

pub fn wavelet_coeffs_pyramidal(
    path: &[f64],
    w: &WaveletSpec,
    j_min: u32,
    j_max: u32,
) -> Result<WaveletCoefGrid> {
    if j_min == 0 || j_min > j_max {
        return Err(Error::config("octaves must satisfy 1 ≤ j_min ≤ j_max"));
    }
    if path.len() < 2 {
        return Err(Error::config("path must contain at least two samples"));
    }
    let n = path.len() - 1;
    let need = (1usize << j_max) * (2 * w.q - 1);
    if octave_count(n, w.q, j_max) == 0 {
        return Err(Error::config(format!(
            "path of length {n} is too short for octave {j_max}: need more than {need} time units"
        )));
    }
    if path.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("path contains non-finite samples"));
    }
    let len = w.lowpass.len();
    let mut approx = path.to_vec();
    let mut octaves = Vec::new();
    for j in 1..=j_max {
        let valid = (approx.len() - len) / 2 + 1;
        let mut next = Vec::with_capacity(valid);
        let mut detail = Vec::with_capacity(valid);
        for k in 0..valid {
            let window = &approx[2 * k..2 * k + len];
            next.push(window.iter().zip(&w.lowpass).map(|(a, b)| a * b).sum());
            detail.push(window.iter().zip(&w.highpass).map(|(a, b)| a * b).sum::<f64>());
        }
        if j >= j_min {
            detail.truncate(octave_count(n, w.q, j));
            octaves.push(Octave { j, coeffs: detail });
        }
        approx = next;
    }
    let counts = octaves.iter().map(|o| o.coeffs.len()).collect();
    Ok(WaveletCoefGrid {
        octaves,
        meta: GridMeta {
            route: CoefRoute::Pyramidal,
            alpha: None,
            hurst: None,
            family: w.family,
            q: w.q,
            n,
            counts,
            delta: None,
            horizon: None,
            seed: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{build_wavelet, WaveletFamily};

    #[test]
    fn constants_and_ramps_vanish() {
        let w = build_wavelet(WaveletFamily::Daubechies, 2, 8).unwrap();
        let constant = vec![3.7; 1025];
        let g = wavelet_coeffs_pyramidal(&constant, &w, 1, 5).unwrap();
        for o in &g.octaves {
            assert!(o.coeffs.iter().all(|d| d.abs() < 1e-12));
        }
        let ramp: Vec<f64> = (0..=1024).map(|t| 0.25 * t as f64 - 3.0).collect();
        let g = wavelet_coeffs_pyramidal(&ramp, &w, 1, 5).unwrap();
        for o in &g.octaves {
            assert!(o.coeffs.iter().all(|d| d.abs() < 1e-9), "octave {}", o.j);
        }
        let haar = build_wavelet(WaveletFamily::Haar, 1, 8).unwrap();
        let g = wavelet_coeffs_pyramidal(&constant, &haar, 1, 3).unwrap();
        assert!(g.octaves.iter().all(|o| o.coeffs.iter().all(|d| d.abs() < 1e-12)));
    }

    #[test]
    fn counts_follow_border_rule() {
        let w = build_wavelet(WaveletFamily::Daubechies, 2, 8).unwrap();
        let path: Vec<f64> = (0..=1024).map(|t| (t as f64).sin()).collect();
        let g = wavelet_coeffs_pyramidal(&path, &w, 1, 5).unwrap();
        assert_eq!(g.counts(), vec![509, 253, 125, 61, 29]);
        assert!(g.counts().windows(2).all(|c| c[0] >= c[1]));
        assert!(matches!(
            wavelet_coeffs_pyramidal(&path[..100], &w, 1, 5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn haar_first_octave_is_scaled_difference() {
        let w = build_wavelet(WaveletFamily::Haar, 1, 8).unwrap();
        let path = [0.0, 1.0, 3.0, 2.0, 5.0];
        let g = wavelet_coeffs_pyramidal(&path, &w, 1, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(g.octaves[0].coeffs.len(), 1);
        assert!((g.octaves[0].coeffs[0] - s * (0.0 - 1.0)).abs() < 1e-15);
    }
}
