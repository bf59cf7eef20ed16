//! 2-D FFTs and spectral derivatives on the uniform N×N grid of [0, 2π)².
//!
//! Arrays are row-major with index `i·N + j` for the grid point `(2πi/N, 2πj/N)`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers with the Nyquist mode zeroed.
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

/// Per-worker scratch space.
pub struct Workspace {
    pub fft_scratch: Vec<Complex64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
}

/// Signed frequency of FFT bin `index`.
pub fn frequency(index: usize, n: usize) -> i64 {
    if index < n / 2 {
        index as i64
    } else {
        index as i64 - n as i64
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let wavenumbers = (0..n)
            .map(|i| if i == n / 2 { 0.0 } else { frequency(i, n) as f64 })
            .collect();
        Spectral { n, forward, inverse, wavenumbers }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn workspace(&self) -> Workspace {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        let nn = self.n * self.n;
        Workspace {
            fft_scratch: vec![Complex64::default(); len],
            a: vec![Complex64::default(); nn],
            b: vec![Complex64::default(); nn],
            c: vec![Complex64::default(); nn],
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(data, scratch);
        transpose(data, self.n);
        self.forward.process_with_scratch(data, scratch);
        transpose(data, self.n);
    }

    /// Inverse transform in place, including the 1/N² factor.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, scratch);
        transpose(data, self.n);
        self.inverse.process_with_scratch(data, scratch);
        transpose(data, self.n);
        let s = 1.0 / (self.n * self.n) as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// Largest |k|² among the derivative wavenumbers.
    pub fn max_k2(&self) -> f64 {
        let kmax = self.wavenumbers.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        2.0 * kmax * kmax
    }
}
