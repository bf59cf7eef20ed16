//! Pseudospectral realization of `P_u(h) = −h² Δ_{g_u} + V` in the symmetrized gauge.
//!
//! With `ρ = √det g_u = det(g_u⁻¹)^{−1/2}` the operator acts on `ψ = ρ^{1/2} f` as
//!
//! ```text
//! H ψ = −W ∂ᵢ (Mᵢⱼ ∂ⱼ (W ψ)) + V ψ,    W = ρ^{−1/2},  M = h² ρ g_u⁻¹,
//! ```
//!
//! which is Hermitian for the plain grid inner product.

use super::spectral::{Spectral, Workspace};
use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::metric::MetricFamily;
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct OperatorHandle {
    n: usize,
    h: f64,
    u: Vec<f64>,
    spectral: Spectral,
    weight: Vec<f64>,
    sqrt_rho: Arc<Vec<f64>>,
    m: Vec<Sym2>,
    v: Vec<f64>,
    norm_bound: f64,
}

pub fn grid_point(idx: usize, n: usize) -> [f64; 2] {
    [TAU * (idx / n) as f64 / n as f64, TAU * (idx % n) as f64 / n as f64]
}

pub fn build_operator(family: &MetricFamily, u: &[f64], h: f64, n: usize) -> Result<OperatorHandle> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::validation("quantum.n", format!("grid size must be even and at least 4, got {n}")));
    }
    if !(h > 0.0) {
        return Err(Error::validation("physics.h", format!("h must be positive, got {h}")));
    }
    family.check_in_box(u)?;
    let nn = n * n;
    let mut weight = Vec::with_capacity(nn);
    let mut sqrt_rho = Vec::with_capacity(nn);
    let mut m = Vec::with_capacity(nn);
    let mut v = Vec::with_capacity(nn);
    for idx in 0..nn {
        let x = grid_point(idx, n);
        let g = family.inverse_metric(u, x);
        let lam = g.min_eigenvalue();
        if !(lam > 0.0) {
            return Err(Error::NotPositiveDefinite { x, u: u.to_vec(), min_eig: lam });
        }
        let rho = 1.0 / g.det().sqrt();
        weight.push(1.0 / rho.sqrt());
        sqrt_rho.push(rho.sqrt());
        m.push(g * (h * h * rho));
        v.push(family.potential().value(x));
    }
    let spectral = Spectral::new(n);
    let max_m = m.iter().fold(0.0f64, |a, s| a.max(s.eigenvalues()[1]));
    let max_w2 = weight.iter().fold(0.0f64, |a, w| a.max(w * w));
    let max_v = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let norm_bound = max_m * spectral.max_k2() * max_w2 + max_v;
    Ok(OperatorHandle { n, h, u: u.to_vec(), spectral, weight, sqrt_rho: Arc::new(sqrt_rho), m, v, norm_bound })
}

impl OperatorHandle {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Upper bound of the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    /// `ρ^{1/2}` on the grid, the factor between the physical and symmetrized amplitudes.
    pub fn sqrt_rho(&self) -> &Arc<Vec<f64>> {
        &self.sqrt_rho
    }

    pub fn workspace(&self) -> Workspace {
        self.spectral.workspace()
    }

    /// `out = H f`. Six 2-D FFTs.
    pub fn apply(&self, f: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let n = self.n;
        let k = self.spectral.wavenumbers();
        let Workspace { fft_scratch, a, b, c } = ws;
        for ((ai, fi), wi) in a.iter_mut().zip(f).zip(&self.weight) {
            *ai = *fi * *wi;
        }
        self.spectral.forward(a, fft_scratch);
        for idx in 0..n * n {
            let s = a[idx];
            b[idx] = Complex64::new(-s.im, s.re) * k[idx / n];
            c[idx] = Complex64::new(-s.im, s.re) * k[idx % n];
        }
        self.spectral.inverse(b, fft_scratch);
        self.spectral.inverse(c, fft_scratch);
        for idx in 0..n * n {
            let mm = self.m[idx];
            let (d1, d2) = (b[idx], c[idx]);
            b[idx] = d1 * mm.xx + d2 * mm.xy;
            c[idx] = d1 * mm.xy + d2 * mm.yy;
        }
        self.spectral.forward(b, fft_scratch);
        self.spectral.forward(c, fft_scratch);
        for idx in 0..n * n {
            let s = b[idx] * k[idx / n] + c[idx] * k[idx % n];
            a[idx] = Complex64::new(-s.im, s.re);
        }
        self.spectral.inverse(a, fft_scratch);
        for idx in 0..n * n {
            out[idx] = -a[idx] * self.weight[idx] + f[idx] * self.v[idx];
        }
    }
}
