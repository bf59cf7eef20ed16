//! The probability measure `dν = c_k(ε) χ(u)² du` on the parameter box and its quadratures.

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

/// Name recorded in every report for the cutoff used here.
pub const PLATEAU_PROFILE: &str = "plateau-exp: 1 on |s|<=1/2, f(1-r)/(f(1-r)+f(r)) with r=2|s|-1, f(x)=exp(-1/x)";

fn smooth_step_part(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// One-dimensional plateau cutoff: 1 on `[−½, ½]`, C^∞, zero outside `(−1, 1)`.
pub fn chi1(s: f64) -> f64 {
    let a = s.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        let r = 2.0 * a - 1.0;
        let p = smooth_step_part(1.0 - r);
        p / (p + smooth_step_part(r))
    }
}

/// Gauss–Legendre nodes and weights on `[a, b]`, ascending; one node means the midpoint rule.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    if n == 1 {
        return vec![(mid, b - a)];
    }
    let rule = GaussLegendre::new(n).expect("degree >= 2");
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs
}

/// Composite rule on `[−1, 1]` with panels `[−1, −½]`, `[−½, ½]`, `[½, 1]` matching the
/// plateau edges, `n` nodes in total.
pub fn plateau_panel_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 3, "need at least one node per panel");
    let mut middle = n / 3;
    if (n - middle) % 2 == 1 {
        middle += 1;
    }
    let outer = (n - middle) / 2;
    let mut out = gauss_legendre(outer, -1.0, -0.5);
    out.extend(gauss_legendre(middle, -0.5, 0.5));
    out.extend(gauss_legendre(outer, 0.5, 1.0));
    out
}

/// `∫_{−1}^{1} χ₁(s)² ds` by Gauss–Legendre on the transition panels.
pub fn chi1_squared_integral() -> f64 {
    let tail: f64 = (0..8)
        .map(|p| {
            let a = 0.5 + p as f64 / 16.0;
            gauss_legendre(40, a, a + 1.0 / 16.0).iter().map(|(s, w)| w * chi1(*s).powi(2)).sum::<f64>()
        })
        .sum();
    1.0 + 2.0 * tail
}

/// Romberg integration of `χ₁²` on `[½, 1]`, used as an independent check.
pub fn chi1_squared_integral_romberg(levels: usize) -> f64 {
    let f = |s: f64| chi1(s).powi(2);
    let (a, b) = (0.5, 1.0);
    let mut r = vec![vec![0.0; levels]; levels];
    r[0][0] = 0.5 * (b - a) * (f(a) + f(b));
    for i in 1..levels {
        let n = 1usize << i;
        let hstep = (b - a) / n as f64;
        let mid: f64 = (0..n / 2).map(|j| f(a + (2 * j + 1) as f64 * hstep)).sum();
        r[i][0] = 0.5 * r[i - 1][0] + hstep * mid;
        for j in 1..=i {
            let p = 4f64.powi(j as i32);
            r[i][j] = (p * r[i][j - 1] - r[i - 1][j - 1]) / (p - 1.0);
        }
    }
    1.0 + 2.0 * r[levels - 1][levels - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationMeasure {
    pub k: usize,
    pub epsilon: f64,
    pub profile: String,
    /// `∫ χ₁²` over `[−1, 1]`.
    pub chi1_sq_integral: f64,
    /// `c_k(ε) = (ε ∫χ₁²)^{−k}`.
    pub normalization: f64,
}

pub fn make_measure(k: usize, epsilon: f64) -> Result<DeformationMeasure> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::validation("measure.epsilon", format!("must be positive, got {epsilon}")));
    }
    if k == 0 {
        return Err(Error::validation("measure.k", "need at least one parameter"));
    }
    let i1 = chi1_squared_integral();
    Ok(DeformationMeasure {
        k,
        epsilon,
        profile: PLATEAU_PROFILE.into(),
        chi1_sq_integral: i1,
        normalization: (epsilon * i1).powi(-(k as i32)),
    })
}

impl DeformationMeasure {
    /// `χ(u) = Π χ₁(uᵢ/ε)`.
    pub fn chi(&self, u: &[f64]) -> f64 {
        u.iter().map(|v| chi1(v / self.epsilon)).product()
    }

    /// Density `c_k(ε) χ(u)²`.
    pub fn density(&self, u: &[f64]) -> f64 {
        self.normalization * self.chi(u).powi(2)
    }

    /// Tensor rule: nodes in `u` with weights `c_k χ² du` (before self-normalization).
    pub fn tensor_nodes(&self, per_axis: usize) -> Vec<(Vec<f64>, f64)> {
        let rule: Vec<(f64, f64)> = plateau_panel_rule(per_axis)
            .into_iter()
            .map(|(s, w)| (s * self.epsilon, w * self.epsilon * chi1(s).powi(2)))
            .collect();
        let total = rule.len().pow(self.k as u32);
        (0..total)
            .map(|mut idx| {
                let mut u = vec![0.0; self.k];
                let mut w = self.normalization;
                // last coordinate varies fastest
                for d in (0..self.k).rev() {
                    let (s, ws) = rule[idx % rule.len()];
                    u[d] = s;
                    w *= ws;
                    idx /= rule.len();
                }
                (u, w)
            })
            .collect()
    }

    /// `∫ f dν` with the tensor rule, not self-normalized.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, per_axis: usize, f: F) -> f64 {
        let terms: Vec<f64> = self.tensor_nodes(per_axis).iter().map(|(u, w)| w * f(u)).collect();
        pairwise_sum(&terms)
    }
}
