//! Moments of `Re φ^{(u)}_{h,t}(x)` under `ν`, one propagation per quadrature node.

use super::measure::DeformationMeasure;
use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::lowdisc::shifted_halton_point;
use crate::metric::MetricFamily;
use crate::quantum::{propagated_value, Interpolator, KrylovOptions};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBudget {
    /// Tensor nodes per axis (k ≤ 4).
    pub nodes_per_axis: usize,
    /// Points per replicate for quasi-Monte Carlo (k > 4).
    pub qmc_points: usize,
    pub qmc_replicates: usize,
    /// Hard cap on propagations.
    pub max_nodes: usize,
    pub grid: Option<usize>,
    pub krylov: KrylovOptions,
}

impl Default for MomentBudget {
    fn default() -> Self {
        MomentBudget {
            nodes_per_axis: 11,
            qmc_points: 512,
            qmc_replicates: 8,
            max_nodes: 200_000,
            grid: None,
            krylov: KrylovOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddMoment {
    pub p: u32,
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub x: [f64; 2],
    pub t: f64,
    pub h: f64,
    pub m: [i64; 2],
    pub energy: f64,
    pub grid: usize,
    pub k: usize,
    pub epsilon: f64,
    pub profile: String,
    pub rule: String,
    pub nodes: usize,
    pub seed: u64,
    pub mean_re: Estimate,
    pub odd_moments: Vec<OddMoment>,
    /// `∫ (Re φ)² dν`.
    pub second_moment_re: Estimate,
    /// `∫ (Re φ)² dν − (∫ Re φ dν)²`.
    pub variance: Estimate,
    /// `∫ |φ|² dν`, a diagnostic.
    pub raw_abs_sq: Estimate,
    pub mean_im: Estimate,
}

impl MomentReport {
    pub fn moment(&self, p: u32) -> Option<&OddMoment> {
        self.odd_moments.iter().find(|m| m.p == p)
    }
}

/// Weighted statistics of the node values.
#[derive(Clone, Debug)]
struct Stats {
    odd: Vec<(u32, f64)>,
    mean_re: f64,
    second: f64,
    abs_sq: f64,
    mean_im: f64,
}

impl Stats {
    fn variance(&self) -> f64 {
        self.second - self.mean_re * self.mean_re
    }
}

fn weighted_stats(values: &[Complex64], weights: &[f64], p_max: u32) -> Stats {
    let total = pairwise_sum(weights);
    let avg = |f: &dyn Fn(Complex64) -> f64| -> f64 {
        let terms: Vec<f64> = values.iter().zip(weights).map(|(v, w)| w * f(*v)).collect();
        pairwise_sum(&terms) / total
    };
    let odd = (1..=p_max)
        .step_by(2)
        .map(|p| (p, avg(&|v: Complex64| v.re.powi(p as i32))))
        .collect();
    Stats {
        odd,
        mean_re: avg(&|v| v.re),
        second: avg(&|v| v.re * v.re),
        abs_sq: avg(&|v| v.norm_sqr()),
        mean_im: avg(&|v| v.im),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_nodes(
    family: &MetricFamily,
    nodes: &[Vec<f64>],
    x: [f64; 2],
    t: f64,
    h: f64,
    m: [i64; 2],
    n: usize,
    krylov: &KrylovOptions,
) -> Result<Vec<Complex64>> {
    let interp = Interpolator::new(n, x);
    nodes
        .par_iter()
        .map(|u| propagated_value(family, u, h, m, n, t, &interp, krylov))
        .collect()
}

/// Estimate the moments of `Re φ^{(u)}_{h,t}(x)` with `h²|m|²` as the energy.
#[allow(clippy::too_many_arguments)]
pub fn estimate_moments(
    family: &MetricFamily,
    measure: &DeformationMeasure,
    x: [f64; 2],
    t: f64,
    h: f64,
    m: [i64; 2],
    p_max: u32,
    budget: &MomentBudget,
    seed: u64,
) -> Result<MomentReport> {
    if measure.k != family.k() {
        return Err(Error::validation("measure.k", format!("measure has k = {}, family has {}", measure.k, family.k())));
    }
    if (measure.epsilon - family.epsilon()).abs() > 1e-15 * family.epsilon() {
        return Err(Error::validation("measure.epsilon", "measure and family disagree on epsilon"));
    }
    if !family.potential().is_constant() {
        return Err(Error::validation(
            "family.potential",
            "flat eigenfunctions need a constant potential",
        ));
    }
    let n = budget.grid.unwrap_or_else(|| crate::quantum::default_resolution(m));
    let energy = h * h * (m[0] * m[0] + m[1] * m[1]) as f64 + family.potential().mean_coefficient();
    crate::quantum::check_resolution(n, m, energy, h, 4.0)?;
    let p_max = p_max.max(1);

    let (rule, nodes, stats, err) = if measure.k <= 4 {
        let fine = measure.tensor_nodes(budget.nodes_per_axis);
        let coarse_n = budget.nodes_per_axis.div_ceil(2).max(3);
        let coarse = measure.tensor_nodes(coarse_n);
        if fine.len() + coarse.len() > budget.max_nodes {
            return Err(Error::Budget(format!("{} nodes requested, cap {}", fine.len() + coarse.len(), budget.max_nodes)));
        }
        let run = |set: &[(Vec<f64>, f64)]| -> Result<Stats> {
            let us: Vec<Vec<f64>> = set.iter().map(|(u, _)| u.clone()).collect();
            let ws: Vec<f64> = set.iter().map(|(_, w)| *w).collect();
            let vals = evaluate_nodes(family, &us, x, t, h, m, n, &budget.krylov)?;
            Ok(weighted_stats(&vals, &ws, p_max))
        };
        let sf = run(&fine)?;
        let sc = run(&coarse)?;
        let err = Stats {
            odd: sf.odd.iter().zip(&sc.odd).map(|(a, b)| (a.0, (a.1 - b.1).abs())).collect(),
            mean_re: (sf.mean_re - sc.mean_re).abs(),
            second: (sf.second - sc.second).abs(),
            abs_sq: (sf.abs_sq - sc.abs_sq).abs(),
            mean_im: (sf.mean_im - sc.mean_im).abs(),
        };
        ("tensor-gauss-legendre-plateau-panels".to_string(), fine.len() + coarse.len(), sf, err)
    } else {
        let total = budget.qmc_points * budget.qmc_replicates;
        if total > budget.max_nodes {
            return Err(Error::Budget(format!("{total} nodes requested, cap {}", budget.max_nodes)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reps = Vec::with_capacity(budget.qmc_replicates);
        for _ in 0..budget.qmc_replicates {
            let shift: Vec<f64> = (0..measure.k).map(|_| rng.gen::<f64>()).collect();
            let us: Vec<Vec<f64>> = (0..budget.qmc_points as u64)
                .map(|i| {
                    shifted_halton_point(i, &shift)
                        .iter()
                        .map(|s| measure.epsilon * (2.0 * s - 1.0))
                        .collect()
                })
                .collect();
            let ws: Vec<f64> = us.iter().map(|u| measure.density(u)).collect();
            let vals = evaluate_nodes(family, &us, x, t, h, m, n, &budget.krylov)?;
            reps.push(weighted_stats(&vals, &ws, p_max));
        }
        let r = reps.len() as f64;
        let mean_of = |f: &dyn Fn(&Stats) -> f64| reps.iter().map(f).sum::<f64>() / r;
        let se_of = |f: &dyn Fn(&Stats) -> f64| {
            let mu = mean_of(f);
            (reps.iter().map(|s| (f(s) - mu).powi(2)).sum::<f64>() / (r * (r - 1.0).max(1.0))).sqrt()
        };
        let odd_idx: Vec<usize> = (0..reps[0].odd.len()).collect();
        let stats = Stats {
            odd: odd_idx.iter().map(|&i| (reps[0].odd[i].0, mean_of(&|s| s.odd[i].1))).collect(),
            mean_re: mean_of(&|s| s.mean_re),
            second: mean_of(&|s| s.second),
            abs_sq: mean_of(&|s| s.abs_sq),
            mean_im: mean_of(&|s| s.mean_im),
        };
        let err = Stats {
            odd: odd_idx.iter().map(|&i| (reps[0].odd[i].0, se_of(&|s| s.odd[i].1))).collect(),
            mean_re: se_of(&|s| s.mean_re),
            second: se_of(&|s| s.second),
            abs_sq: se_of(&|s| s.abs_sq),
            mean_im: se_of(&|s| s.mean_im),
        };
        ("randomized-qmc-halton".to_string(), total, stats, err)
    };

    let variance_err = err.second + 2.0 * stats.mean_re.abs() * err.mean_re;
    Ok(MomentReport {
        x,
        t,
        h,
        m,
        energy,
        grid: n,
        k: measure.k,
        epsilon: measure.epsilon,
        profile: measure.profile.clone(),
        rule,
        nodes,
        seed,
        mean_re: Estimate { value: stats.mean_re, error: err.mean_re },
        odd_moments: stats
            .odd
            .iter()
            .zip(&err.odd)
            .map(|(a, e)| OddMoment { p: a.0, value: a.1, error: e.1 })
            .collect(),
        second_moment_re: Estimate { value: stats.second, error: err.second },
        variance: Estimate { value: stats.variance(), error: variance_err },
        raw_abs_sq: Estimate { value: stats.abs_sq, error: err.abs_sq },
        mean_im: Estimate { value: stats.mean_im, error: err.mean_im },
    })
}
