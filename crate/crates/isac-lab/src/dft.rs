//! Thin DFT wrappers with a fixed, unnormalized convention.
//!
//! Forward: `X[k] = sum_n x[n] exp(-j 2 pi n k / N)`.
//! Inverse: `x[n] = sum_k X[k] exp(+j 2 pi n k / N)` (no 1/N factor).
//!
//! Range profiles are inverse transforms of per-subcarrier products, so the
//! unnormalized inverse keeps peak amplitudes at `N * alpha` exactly.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Planned transforms for one length, reusable across snapshots.
pub struct Dft {
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Dft {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized forward DFT.
    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        buf
    }

    /// Unnormalized inverse DFT (positive exponent, no 1/N).
    pub fn inverse(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut buf = x.to_vec();
        self.inverse.process(&mut buf);
        buf
    }
}

/// One-shot unnormalized inverse DFT.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    Dft::new(x.len()).inverse(x)
}

/// One-shot unnormalized forward DFT.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    Dft::new(x.len()).forward(x)
}
