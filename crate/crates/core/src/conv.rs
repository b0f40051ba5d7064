//! Linear convolution of long noise sequences with fixed kernels.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// FFT convolver for a fixed kernel and a fixed signal length. The kernel
/// transform is computed once and reused across replicates.
pub struct FftConvolver {
    size: usize,
    signal_len: usize,
    kernel_len: usize,
    kernel_fft: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftConvolver {
    pub fn new(kernel: &[f64], signal_len: usize) -> Self {
        let size = (signal_len + kernel.len()).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_fft: Vec<Complex64> = kernel
            .iter()
            .map(|&k| Complex64::new(k, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(size)
            .collect();
        forward.process(&mut kernel_fft);
        Self {
            size,
            signal_len,
            kernel_len: kernel.len(),
            kernel_fft,
            forward,
            inverse,
        }
    }

    /// `y[m] = Σ_q kernel[q] signal[m − q]` for `m < signal_len + kernel_len − 1`.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        assert_eq!(signal.len(), self.signal_len, "signal length fixed at construction");
        let mut buf: Vec<Complex64> = signal
            .iter()
            .map(|&s| Complex64::new(s, 0.0))
            .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
            .take(self.size)
            .collect();
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.iter()
            .take(self.signal_len + self.kernel_len - 1)
            .map(|c| c.re * scale)
            .collect()
    }
}

/// Direct evaluation of the same convolution at one output index.
pub fn convolve_at(signal: &[f64], kernel: &[f64], m: usize) -> f64 {
    let q_lo = m.saturating_sub(signal.len() - 1);
    let q_hi = m.min(kernel.len() - 1);
    (q_lo..=q_hi).map(|q| kernel[q] * signal[m - q]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct() {
        let signal: Vec<f64> = (0..257).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0).collect();
        let kernel: Vec<f64> = (0..31).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let conv = FftConvolver::new(&kernel, signal.len());
        let y = conv.apply(&signal);
        assert_eq!(y.len(), 287);
        for m in [0, 1, 30, 100, 256, 286] {
            let d = convolve_at(&signal, &kernel, m);
            assert!((y[m] - d).abs() < 1e-10 * (1.0 + d.abs()), "m={m}");
        }
    }
}
