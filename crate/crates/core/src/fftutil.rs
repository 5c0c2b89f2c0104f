//! Shared FFT plumbing for the periodic lattice (1-d and row-column 2-d).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub(crate) struct FftPair {
    n: usize,
    dim: u8,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(n: usize, dim: u8) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, dim, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    fn run(&self, buf: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        if self.dim == 1 {
            plan.process(buf);
            return;
        }
        for row in buf.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut t = vec![Complex::default(); n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = buf[i * n + j];
            }
        }
        for row in t.chunks_exact_mut(n) {
            plan.process(row);
        }
        for i in 0..n {
            for j in 0..n {
                buf[i * n + j] = t[j * n + i];
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex<f64>]) {
        self.run(buf, &self.fwd.clone());
    }

    /// Unnormalized inverse transform; divide by `n^dim` to invert `forward`.
    pub fn inverse(&self, buf: &mut [Complex<f64>]) {
        self.run(buf, &self.inv.clone());
    }
}
