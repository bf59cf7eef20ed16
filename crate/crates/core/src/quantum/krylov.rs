//! Lanczos approximation of `exp(−i τ H / h) ψ` with adaptive substeps.

use super::operator::OperatorHandle;
use super::state::WaveState;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovOptions {
    /// Krylov subspace dimension per substep.
    pub dim: usize,
    /// Error allowed over the whole propagation, shared among substeps in proportion to length.
    pub tol: f64,
    /// Upper bound on `‖H‖ τ / h` for a substep.
    pub phase_budget: f64,
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { dim: 24, tol: 1e-10, phase_budget: 20.0, max_substeps: 100_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub substeps: usize,
    pub rejected: usize,
    pub applies: usize,
    pub breakdowns: usize,
    /// Sum of the accepted local error estimates.
    pub error_estimate: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// β of the vector that would extend the basis; zero after a breakdown.
    residual_beta: f64,
    exact: bool,
}

fn lanczos(op: &OperatorHandle, psi: &[Complex64], scale: f64, dim: usize, ws: &mut super::spectral::Workspace, applies: &mut usize) -> Lanczos {
    let nn = psi.len();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    basis.push(psi.iter().map(|z| z / scale).collect());
    let mut alpha = Vec::with_capacity(dim);
    let mut beta: Vec<f64> = Vec::with_capacity(dim);
    let mut w = vec![Complex64::default(); nn];
    let threshold = 1e-12 * op.norm_bound().max(1.0);
    for j in 0..dim {
        op.apply(&basis[j], &mut w, ws);
        *applies += 1;
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= vi * a;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= vi * b;
            }
        }
        // full reorthogonalization, twice is enough
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * c;
                }
            }
        }
        let b = norm(&w);
        if b < threshold {
            return Lanczos { basis, alpha, beta, residual_beta: 0.0, exact: true };
        }
        if j + 1 == dim {
            return Lanczos { basis, alpha, beta, residual_beta: b, exact: false };
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    unreachable!()
}

/// `exp(−i τ T / h) e₁` for the tridiagonal `T`.
fn small_exponential(eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64, h: f64) -> Vec<Complex64> {
    let q = &eig.eigenvectors;
    let d = q.nrows();
    let mut out = vec![Complex64::default(); d];
    for l in 0..d {
        let phase = Complex64::from_polar(q[(0, l)], -tau * eig.eigenvalues[l] / h);
        for (r, o) in out.iter_mut().enumerate() {
            *o += phase * q[(r, l)];
        }
    }
    out
}

/// Propagate `state` by `exp(−i t P_u(h) / h)`. The result is in the operator's weighted gauge.
pub fn propagate(state: &WaveState, op: &OperatorHandle, t: f64, opts: &KrylovOptions) -> Result<(WaveState, PropagationStats)> {
    if state.n != op.n() {
        return Err(Error::validation("state.n", format!("state grid {} differs from operator grid {}", state.n, op.n())));
    }
    if opts.dim < 2 {
        return Err(Error::validation("quantum.krylov_dim", "Krylov dimension must be at least 2"));
    }
    let h = op.h();
    let mut cur = state.to_weighted(op.sqrt_rho());
    let mut stats = PropagationStats::default();
    if t == 0.0 {
        return Ok((cur, stats));
    }
    let dir = t.signum();
    let total = t.abs();
    let tau_max = opts.phase_budget * h / op.norm_bound().max(f64::MIN_POSITIVE);
    let mut ws = op.workspace();
    let mut done = 0.0;
    let mut tau = tau_max.min(total);
    while total - done > 1e-15 * total {
        if stats.substeps >= opts.max_substeps {
            return Err(Error::ToleranceFailure { substeps: stats.substeps });
        }
        let scale = norm(&cur.data);
        if scale == 0.0 {
            break;
        }
        let kry = lanczos(op, &cur.data, scale, opts.dim, &mut ws, &mut stats.applies);
        let d = kry.alpha.len();
        let mut tmat = DMatrix::zeros(d, d);
        for i in 0..d {
            tmat[(i, i)] = kry.alpha[i];
            if i + 1 < d {
                tmat[(i, i + 1)] = kry.beta[i];
                tmat[(i + 1, i)] = kry.beta[i];
            }
        }
        let eig = SymmetricEigen::new(tmat);
        let remaining = total - done;
        let (step, coeffs, err) = if kry.exact {
            stats.breakdowns += 1;
            (remaining, small_exponential(&eig, dir * remaining, h), 0.0)
        } else {
            let mut step = tau.min(remaining);
            loop {
                let c = small_exponential(&eig, dir * step, h);
                let err = kry.residual_beta * c[d - 1].norm() * scale;
                if err <= opts.tol * step / total {
                    break (step, c, err);
                }
                stats.rejected += 1;
                step *= 0.5;
                if step < 1e-12 * total {
                    return Err(Error::ToleranceFailure { substeps: stats.substeps });
                }
            }
        };
        let mut next = vec![Complex64::default(); cur.data.len()];
        for (c, v) in coeffs.iter().zip(&kry.basis) {
            let c = c * scale;
            for (o, vi) in next.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
        cur.data = next;
        done += step;
        stats.substeps += 1;
        stats.error_estimate += err;
        // let the step grow back after a rejection
        tau = (2.0 * step).min(tau_max);
    }
    Ok((cur, stats))
}
