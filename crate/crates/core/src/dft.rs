use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and normalized inverse transforms of one fixed length.
#[derive(Clone)]
pub(crate) struct Dft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub(crate) fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/len` factor.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    pub(crate) fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    pub(crate) fn inverse_real(&self, input: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = input.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.inverse(&mut buf);
        buf
    }
}

/// Splits a transform result into its real part, failing when the imaginary
/// residue exceeds `tol` times the larger of the real-part norm and `floor`.
pub(crate) fn real_part_checked(
    buf: &[Complex64],
    tol: f64,
    floor: f64,
) -> Result<Vec<f64>, (f64, f64)> {
    let re_norm = buf.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
    let im_norm = buf.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if im_norm > tol * re_norm.max(floor).max(f64::MIN_POSITIVE) {
        return Err((im_norm, re_norm));
    }
    Ok(buf.iter().map(|c| c.re).collect())
}
