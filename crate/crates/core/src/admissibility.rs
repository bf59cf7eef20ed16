//! Numerical certificates for the two admissibility conditions and the quadratic-form
//! rank check behind them.
//!
//! Condition A asks for invertibility of `d_{u′} d_ξ p_u` near the energy shell; it is
//! certified on a Halton sample of `(x, energy, angle)` in the band `(E − cε, E + cε)`.
//! Condition B asks for one conformal direction `∂_{u_α} g_u⁻¹ = a(x) g₀⁻¹` with `a ≠ 0`.

use crate::classical::flow::{flow, FlowOptions, PhasePoint};
use crate::error::{Error, Result};
use crate::linalg::det2;
use crate::lowdisc::halton;
use crate::metric::{MetricFamily, Region};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilityOptions {
    /// Halton points scanned for condition A.
    pub samples: usize,
    /// Determinant floor below which condition A fails.
    pub floor: f64,
    /// Multiplier applied to the sampled maximum when estimating c.
    pub safety: f64,
    /// Shell points × parameter points used for the c estimate.
    pub c_samples: usize,
    /// Flow time at which c is estimated.
    pub t: f64,
    pub flow: FlowOptions,
}

impl Default for AdmissibilityOptions {
    fn default() -> Self {
        AdmissibilityOptions {
            samples: 1 << 14,
            floor: 1e-6,
            safety: 1.25,
            c_samples: 256,
            t: 0.1,
            flow: FlowOptions::with_tol(1e-10),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: [f64; 2],
    pub xi: [f64; 2],
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionA {
    pub passed: bool,
    pub min_abs_det: f64,
    pub witness: Witness,
    pub floor: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionB {
    pub passed: bool,
    pub conformal_index: Option<usize>,
    pub min_abs_factor: f64,
    pub witness_x: [f64; 2],
    /// max |h_α(x) − a(x) g₀⁻¹(x)| over the scanned points.
    pub tensor_defect: f64,
    /// The scanned neighbourhood; `None` means the whole torus.
    pub region: Option<Region>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub energy: f64,
    pub uprime_indices: [usize; 2],
    pub c_estimate: f64,
    pub band: [f64; 2],
    pub condition_a: ConditionA,
    pub condition_b: ConditionB,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.condition_a.passed && self.condition_b.passed
    }
}

fn scan_point(region: Option<&Region>, a: f64, b: f64) -> [f64; 2] {
    match region {
        Some(r) => r.sample(a, b),
        None => [TAU * a, TAU * b],
    }
}

/// Point of `p₀⁻¹(energy)` above `x` in direction `θ`, if the fibre is non-empty.
pub fn shell_covector(family: &MetricFamily, x: [f64; 2], energy: f64, theta: f64) -> Option<[f64; 2]> {
    let gap = energy - family.potential().value(x);
    if gap <= 0.0 {
        return None;
    }
    let inv_sqrt = family.g0_inv().value(x).sqrt_spd().inverse()?;
    let e = inv_sqrt.mul_vec([theta.cos(), theta.sin()]);
    let r = gap.sqrt();
    Some([r * e[0], r * e[1]])
}

/// `c = safety · max ‖d_u (p₀ ∘ G_u^{−t})‖₁` over a Halton sample of shell points and parameters.
///
/// The ℓ¹ norm makes `|p₀ ∘ G_u^{−t} − E| ≤ c ε` on the sample for every `u` in the box.
pub fn estimate_c(family: &MetricFamily, energy: f64, opts: &AdmissibilityOptions) -> Result<f64> {
    let k = family.k();
    let eps = family.epsilon();
    let zero = vec![0.0; k];
    let mut best = 0.0f64;
    for i in 0..opts.c_samples as u64 {
        let x = scan_point(family.neighborhood(), halton(i, 0), halton(i, 1));
        let Some(xi) = shell_covector(family, x, energy, TAU * halton(i, 2)) else { continue };
        let u: Vec<f64> = if i == 0 {
            zero.clone()
        } else {
            (0..k).map(|j| eps * (2.0 * halton(i, 3 + j) - 1.0)).collect()
        };
        let jet = flow(family, &u, -opts.t, PhasePoint::new(x, xi), &opts.flow)?;
        let e = jet.endpoint;
        let gx = family.symbol_grad_x(&zero, e.x, e.xi);
        let gxi = family.symbol_grad_xi(&zero, e.x, e.xi);
        let grad = [gx[0], gx[1], gxi[0], gxi[1]];
        let mut norm1 = 0.0;
        for j in 0..k {
            let d: f64 = (0..4).map(|r| grad[r] * jet.u_sensitivity[(r, j)]).sum();
            norm1 += d.abs();
        }
        best = best.max(norm1);
    }
    Ok(opts.safety * best)
}

/// Scan `|det d_{u′} d_ξ p_u|` over the band around `energy`.
///
/// For families affine in `u` the mixed Hessian does not depend on `u`, so the scan is over
/// `(x, energy, θ)` only; the witness carries `u = 0`.
pub fn scan_condition_a(
    family: &MetricFamily,
    band: [f64; 2],
    indices: [usize; 2],
    opts: &AdmissibilityOptions,
) -> Result<ConditionA> {
    let k = family.k();
    if indices[0] == indices[1] || indices.iter().any(|&i| i >= k) {
        return Err(Error::validation("admissibility.uprime_indices", format!("need two distinct indices below {k}")));
    }
    let mut min_abs = f64::INFINITY;
    let mut witness = Witness { x: [0.0; 2], xi: [0.0; 2], u: vec![0.0; k] };
    let mut scanned = 0;
    let mut visit = |x: [f64; 2], e: f64, th: f64| {
        if let Some(xi) = shell_covector(family, x, e, th) {
            scanned += 1;
            let d = det2(family.mixed_hessian(x, xi, indices)).abs();
            if d < min_abs {
                min_abs = d;
                witness.x = x;
                witness.xi = xi;
            }
        }
    };
    for i in 0..opts.samples as u64 {
        let x = scan_point(family.neighborhood(), halton(i, 0), halton(i, 1));
        let e = band[0] + (band[1] - band[0]) * halton(i, 2);
        visit(x, e, TAU * halton(i, 3));
    }
    // band edges at a few deterministic angles
    for (i, e) in band.iter().enumerate() {
        for l in 0..8 {
            let x = scan_point(family.neighborhood(), 0.5 * i as f64 + 0.125, l as f64 / 8.0);
            visit(x, *e, TAU * l as f64 / 8.0);
        }
    }
    Ok(ConditionA { passed: min_abs >= opts.floor, min_abs_det: min_abs, witness, floor: opts.floor, samples: scanned })
}

pub fn check_condition_b(family: &MetricFamily, samples: usize, floor: f64) -> ConditionB {
    let region = family.neighborhood().copied();
    let Some(c) = family.conformal() else {
        return ConditionB {
            passed: false,
            conformal_index: None,
            min_abs_factor: 0.0,
            witness_x: [0.0; 2],
            tensor_defect: 0.0,
            region,
        };
    };
    let h = &family.directions()[c.index];
    let mut min_abs = f64::INFINITY;
    let mut witness = [0.0; 2];
    let mut defect = 0.0f64;
    for i in 0..samples as u64 {
        let x = scan_point(region.as_ref(), halton(i, 0), halton(i, 1));
        let a = c.factor.value(x);
        if a.abs() < min_abs {
            min_abs = a.abs();
            witness = x;
        }
        defect = defect.max((h.value(x) - family.g0_inv().value(x) * a).max_abs());
    }
    ConditionB {
        passed: min_abs > floor && defect <= 1e-12,
        conformal_index: Some(c.index),
        min_abs_factor: min_abs,
        witness_x: witness,
        tensor_defect: defect,
        region,
    }
}

pub fn check_condition_a(
    family: &MetricFamily,
    energy: f64,
    indices: [usize; 2],
    opts: &AdmissibilityOptions,
) -> Result<AdmissibilityReport> {
    let c = estimate_c(family, energy, opts)?;
    let eps = family.epsilon();
    let band = [energy - c * eps, energy + c * eps];
    let condition_a = scan_condition_a(family, band, indices, opts)?;
    let condition_b = check_condition_b(family, opts.samples, opts.floor);
    Ok(AdmissibilityReport { energy, uprime_indices: indices, c_estimate: c, band, condition_a, condition_b })
}

/// Number of traceless quadratic forms in `n` variables.
pub fn kappa(n: usize) -> usize {
    (n * n + n - 2) / 2
}

/// `ξ₁² − ξᵢ²` for `2 ≤ i ≤ n` and `ξⱼξₖ` for `j < k`, as symmetric matrices `Q` with `q(ξ) = ξᵀQξ`.
pub fn traceless_basis(n: usize) -> Vec<DMatrix<f64>> {
    assert!(n >= 2, "traceless basis needs n >= 2");
    let mut out = Vec::with_capacity(kappa(n));
    for i in 1..n {
        let mut q = DMatrix::zeros(n, n);
        q[(0, 0)] = 1.0;
        q[(i, i)] = -1.0;
        out.push(q);
    }
    for j in 0..n {
        for k in j + 1..n {
            let mut q = DMatrix::zeros(n, n);
            q[(j, k)] = 0.5;
            q[(k, j)] = 0.5;
            out.push(q);
        }
    }
    out
}

/// Rank of the tangential parts of `d_ξ q_j` at a unit vector `ξ`.
pub fn tangential_rank(forms: &[DMatrix<f64>], xi: &DVector<f64>, threshold: f64) -> usize {
    let n = xi.len();
    let mut m = DMatrix::zeros(forms.len().max(1), n);
    for (r, q) in forms.iter().enumerate() {
        let g = q * xi * 2.0;
        let tangential = &g - xi * g.dot(xi);
        m.set_row(r, &tangential.transpose());
    }
    m.singular_values().iter().filter(|s| **s > threshold).count()
}

/// Minimum tangential rank over the given sphere samples.
pub fn basis_rank_check(forms: &[DMatrix<f64>], samples: &[DVector<f64>]) -> usize {
    samples.iter().map(|xi| tangential_rank(forms, xi, 1e-8)).min().unwrap_or(0)
}

/// Uniform points on the unit sphere of `R^n`.
pub fn sphere_samples(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm = v.norm();
            v / norm
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{constant_torus, parallel_torus};

    fn quick() -> AdmissibilityOptions {
        AdmissibilityOptions { samples: 2048, c_samples: 32, ..Default::default() }
    }

    #[test]
    fn constant_family_passes_with_det_4e() {
        let f = constant_torus(0.05);
        let r = check_condition_a(&f, 1.0, [0, 1], &quick()).unwrap();
        assert!(r.c_estimate.abs() < 1e-12);
        assert!(r.condition_a.passed);
        assert!((r.condition_a.min_abs_det - 4.0).abs() < 1e-12);
        assert!(r.condition_b.passed);
        assert_eq!(r.condition_b.min_abs_factor, 1.0);
    }

    #[test]
    fn parallel_and_identity_families_fail() {
        let r = check_condition_a(&parallel_torus(0.05), 1.0, [0, 1], &quick()).unwrap();
        assert!(!r.condition_a.passed);
        assert!(r.condition_a.min_abs_det < 1e-6);
        let id = MetricFamily::identity(3, 0.05).unwrap();
        let r = check_condition_a(&id, 1.0, [0, 1], &quick()).unwrap();
        assert!(!r.condition_a.passed && !r.condition_b.passed);
    }

    #[test]
    fn basis_sizes_and_traces() {
        for n in 2..=4 {
            let b = traceless_basis(n);
            assert_eq!(b.len(), kappa(n));
            assert!(b.iter().all(|q| q.trace() == 0.0));
        }
        assert_eq!(kappa(2), 2);
        assert_eq!(kappa(3), 5);
    }

    #[test]
    fn rank_on_circle_and_sphere() {
        let b2 = traceless_basis(2);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(tangential_rank(&b2, &e1, 1e-8), 1);
        let b3 = traceless_basis(3);
        assert_eq!(basis_rank_check(&b3, &sphere_samples(3, 100, 7)), 2);
    }

    #[test]
    fn single_forms_lose_rank() {
        let b2 = traceless_basis(2);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let diag = DVector::from_vec(vec![0.5f64.sqrt(), 0.5f64.sqrt()]);
        // ξ₁² − ξ₂² alone is radial at (1, 0); ξ₁ξ₂ alone is radial on the diagonal
        assert_eq!(tangential_rank(&b2[..1], &e1, 1e-8), 0);
        assert_eq!(tangential_rank(&b2[1..], &e1, 1e-8), 1);
        assert_eq!(tangential_rank(&b2[1..], &diag, 1e-8), 0);
    }
}
