//! FFT-backed sine spectrum on a hard-walled box.
//!
//! A grid of `n` points `x_j = offset + j·dx` (`dx = length/n`) is treated as
//! the interior of a box with walls at `x_0` and `x_n`. The wavefunction is
//! extended oddly to a period of `2n` points, so every Fourier mode of the
//! extension is one of the box eigenfunctions `sin(mπx/length)`. Kinetic
//! phases applied in this representation keep the walls exact.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct SineSpectrum {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pub(crate) buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl SineSpectrum {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(2 * n);
        let inverse = planner.plan_fft_inverse(2 * n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            buf: vec![Complex64::new(0.0, 0.0); 2 * n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    /// Wavenumber of every slot of the `2n` spectrum, in `x0⁻¹`.
    pub(crate) fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
        (0..2 * n)
            .map(|m| PI * m.min(2 * n - m) as f64 / length)
            .collect()
    }

    /// Loads the odd extension of `psi` into the buffer and transforms it.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn forward(&mut self, psi: &[Complex64]) {
        let n = self.n;
        debug_assert_eq!(psi.len(), n);
        self.buf[0] = Complex64::new(0.0, 0.0);
        self.buf[n] = Complex64::new(0.0, 0.0);
        for j in 1..n {
            self.buf[j] = psi[j];
            self.buf[2 * n - j] = -psi[j];
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
    }

    /// Transforms the buffer back and writes the physical half into `psi`.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn inverse(&mut self, psi: &mut [Complex64]) {
        let n = self.n;
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 1.0 / (2 * n) as f64;
        psi[0] = Complex64::new(0.0, 0.0);
        for j in 1..n {
            // Average the two mirrored copies; they agree up to roundoff.
            psi[j] = (self.buf[j] - self.buf[2 * n - j]) * (0.5 * scale);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_mode_is_single_spectral_line() {
        let n = 64;
        let length = 3.0;
        let dx = length / n as f64;
        let psi: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((3.0 * PI * j as f64 * dx / length).sin(), 0.0))
            .collect();
        let mut s = SineSpectrum::new(n);
        s.forward(&psi);
        let power: Vec<f64> = s.buf.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        assert!((power[3] + power[2 * n - 3]) / total > 1.0 - 1e-12);
        let mut back = vec![Complex64::new(0.0, 0.0); n];
        s.inverse(&mut back);
        for (a, b) in psi.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
