//! The limiting variance `∫ β(u″) du″` from classical flow data.
//!
//! For each `u″` node the shell integral only sees covectors whose base point `y` lies in
//! the image of the `u′` box under `u′ ↦ y(u′)`, a patch of diameter `O(|t| ε)` near
//! `x + 2t g₀⁻¹ η`. The `y` integral is therefore taken on that patch with a uniform
//! midpoint grid: the integrand carries `χ²(u′(y, η), u″)`, which is smooth and vanishes
//! before the patch edge, so the midpoint rule converges faster than any power of the spacing.

use crate::classical::uprime::{assemble_u, solve_base_point, solve_uprime, NewtonOptions};
use crate::classical::{spatial_jacobian, FlowOptions, PhasePoint};
use crate::error::{Error, Result};
use crate::linalg::{det2, pairwise_sum, torus_displacement};
use crate::metric::MetricFamily;
use crate::moments::measure::plateau_panel_rule;
use crate::moments::{DeformationMeasure, MomentReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Which invariant measure replaces the normalized Liouville measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureMode {
    Liouville,
    /// Uniform in `y`, `η ≡ ξ₀`: the semiclassical measure of a flat-torus plane wave.
    FixedCovector { xi0: [f64; 2] },
}

impl MeasureMode {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureMode::Liouville => "liouville",
            MeasureMode::FixedCovector { .. } => "fixed-covector",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaConfig {
    pub x: [f64; 2],
    pub t: f64,
    pub energy: f64,
    pub uprime_indices: [usize; 2],
    pub mode: MeasureMode,
    /// Patch grid points per axis in `y`.
    pub patch_points: usize,
    /// Angles on the shell fibre (Liouville mode only).
    pub n_theta: usize,
    /// Composite Gauss nodes per axis in `u″`.
    pub urest_nodes: usize,
    pub newton: NewtonOptions,
}

impl BetaConfig {
    pub fn new(x: [f64; 2], t: f64, energy: f64, uprime_indices: [usize; 2], mode: MeasureMode) -> Self {
        let patch_points = match mode {
            MeasureMode::Liouville => 64,
            MeasureMode::FixedCovector { .. } => 128,
        };
        BetaConfig {
            x,
            t,
            energy,
            uprime_indices,
            mode,
            patch_points,
            n_theta: 64,
            urest_nodes: 31,
            newton: NewtonOptions { flow: FlowOptions::with_tol(1e-11), ..NewtonOptions::default() },
        }
    }

    fn validate(&self, family: &MetricFamily) -> Result<()> {
        if self.t == 0.0 || !self.t.is_finite() {
            return Err(Error::validation("beta.t", "needs a finite nonzero time"));
        }
        if self.patch_points < 2 || self.n_theta == 0 || self.urest_nodes < 3 {
            return Err(Error::validation("beta.resolution", "patch_points >= 2, n_theta >= 1, urest_nodes >= 3"));
        }
        if let MeasureMode::FixedCovector { xi0 } = self.mode {
            let p = family.g0_inv().value(self.x).quad(xi0) + family.potential().value(self.x);
            if (p - self.energy).abs() > 1e-9 * self.energy.abs().max(1.0) {
                return Err(Error::validation(
                    "beta.mode.xi0",
                    format!("ξ₀ = {xi0:?} has p₀(x, ξ₀) = {p}, expected the energy {}", self.energy),
                ));
            }
        }
        Ok(())
    }
}

/// Result of one integrand evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeValue {
    Value(f64),
    /// `u′(y, η)` leaves the box, where `χ² = 0`.
    OutOfBox,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaNode {
    pub urest: Vec<f64>,
    pub weight: f64,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrandStats {
    pub evaluated: usize,
    pub nonzero: usize,
    pub min_nonzero: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub mode: MeasureMode,
    pub x: [f64; 2],
    pub t: f64,
    pub energy: f64,
    pub epsilon: f64,
    pub k: usize,
    pub profile: String,
    /// Mass of the measure used for normalization.
    pub mass: f64,
    /// The untracked `1 + O(t)` factor, always set to one.
    pub time_factor: f64,
    pub patch_points: usize,
    pub n_theta: usize,
    pub nodes: Vec<BetaNode>,
    pub integral: f64,
    /// `|∫β − ∫β at half resolution|`.
    pub integral_error: f64,
    pub excluded: usize,
    pub out_of_box: usize,
    pub stats: IntegrandStats,
}

/// Shared state for integrand evaluations.
pub struct BetaContext<'a> {
    family: &'a MetricFamily,
    measure: &'a DeformationMeasure,
    cfg: BetaConfig,
    mass: f64,
}

/// `∫_{T²} det(A)^{−1/2}/2 · 2π dy` on a 64² grid (exact for trigonometric `A`).
fn liouville_mass(family: &MetricFamily) -> f64 {
    let n = 64;
    let d = TAU / n as f64;
    let terms: Vec<f64> = (0..n * n)
        .map(|i| {
            let y = [(i / n) as f64 * d, (i % n) as f64 * d];
            0.5 / family.g0_inv().value(y).det().sqrt() * TAU * d * d
        })
        .collect();
    pairwise_sum(&terms)
}

struct Accumulated {
    value: f64,
    excluded: usize,
    out_of_box: usize,
    evaluated: usize,
    nonzero: usize,
    min_nonzero: f64,
    max: f64,
}

impl<'a> BetaContext<'a> {
    pub fn new(family: &'a MetricFamily, measure: &'a DeformationMeasure, cfg: BetaConfig) -> Result<Self> {
        cfg.validate(family)?;
        if measure.k != family.k() || family.k() < 2 {
            return Err(Error::validation("measure.k", "measure and family must share k >= 2"));
        }
        let mass = match cfg.mode {
            MeasureMode::Liouville => liouville_mass(family),
            MeasureMode::FixedCovector { .. } => TAU * TAU,
        };
        Ok(BetaContext { family, measure, cfg, mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn config(&self) -> &BetaConfig {
        &self.cfg
    }

    /// The integrand of `β(u″)` at a shell point `z = (y, η)`, before the measure weight.
    pub fn integrand(&self, urest: &[f64], z: PhasePoint) -> Result<NodeValue> {
        let cfg = &self.cfg;
        let sol = match solve_uprime(self.family, cfg.x, cfg.uprime_indices, urest, cfg.t, z, &cfg.newton) {
            Ok(s) => s,
            Err(Error::OutOfBox { .. }) => return Ok(NodeValue::OutOfBox),
            Err(e) => return Err(e),
        };
        let chi2 = self.measure.chi(&sol.u).powi(2);
        if chi2 == 0.0 {
            return Ok(NodeValue::Value(0.0));
        }
        let at_x = PhasePoint::new(cfg.x, z.xi);
        let num = spatial_jacobian(self.family, &sol.u, cfg.t, at_x, &cfg.newton.flow)?;
        let den = det2(self.family.mixed_hessian(cfg.x, z.xi, cfg.uprime_indices)).abs();
        if den == 0.0 {
            return Err(Error::Numerical(format!("singular mixed Hessian at x = {:?}, η = {:?}", cfg.x, z.xi)));
        }
        let n = 2;
        let pref = self.measure.normalization / (cfg.t.abs().powi(n) * self.mass);
        Ok(NodeValue::Value(pref * num / den * chi2))
    }

    /// Bounding box (as displacements from `center`) of `y(u′)` over the `u′` box.
    fn support_patch(&self, urest: &[f64], eta: [f64; 2]) -> Result<([f64; 2], [f64; 2], [f64; 2])> {
        let cfg = &self.cfg;
        let k = self.family.k();
        let eps = self.family.epsilon();
        let base = |up: [f64; 2]| -> Result<[f64; 2]> {
            let u = assemble_u(k, cfg.uprime_indices, up, urest);
            Ok(solve_base_point(self.family, &u, cfg.t, cfg.x, eta, &cfg.newton)?.0.x)
        };
        let center = base([0.0, 0.0])?;
        let mut lo = [0.0f64; 2];
        let mut hi = [0.0f64; 2];
        for a in [-1.0, 0.0, 1.0] {
            for b in [-1.0, 0.0, 1.0] {
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let d = torus_displacement(center, base([a * eps, b * eps])?);
                for i in 0..2 {
                    lo[i] = lo[i].min(d[i]);
                    hi[i] = hi[i].max(d[i]);
                }
            }
        }
        for i in 0..2 {
            let pad = 0.15 * (hi[i] - lo[i]) + 1e-12;
            lo[i] -= pad;
            hi[i] += pad;
        }
        if hi[0] - lo[0] <= 2.1e-12 || hi[1] - lo[1] <= 2.1e-12 {
            return Err(Error::Numerical("u' to y map is degenerate: empty support patch".into()));
        }
        Ok((center, lo, hi))
    }

    /// Patch integral for one `u″` and one fibre direction.
    fn patch_integral(&self, urest: &[f64], theta: Option<f64>, points: usize, theta_weight: f64) -> Result<Accumulated> {
        let cfg = &self.cfg;
        let eta_at = |y: [f64; 2]| -> Result<[f64; 2]> {
            match (cfg.mode, theta) {
                (MeasureMode::FixedCovector { xi0 }, _) => Ok(xi0),
                (MeasureMode::Liouville, Some(th)) => crate::admissibility::shell_covector(self.family, y, cfg.energy, th)
                    .ok_or_else(|| Error::Caustic { y, gap: cfg.energy - self.family.potential().value(y), margin: 0.0 }),
                (MeasureMode::Liouville, None) => unreachable!("liouville patches carry an angle"),
            }
        };
        let eta_c = eta_at(cfg.x)?;
        let (center, lo, hi) = self.support_patch(urest, eta_c)?;
        let dy = [(hi[0] - lo[0]) / points as f64, (hi[1] - lo[1]) / points as f64];
        let outcomes: Vec<(f64, Option<NodeValue>)> = (0..points * points)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / points, idx % points);
                let y = [
                    center[0] + lo[0] + (i as f64 + 0.5) * dy[0],
                    center[1] + lo[1] + (j as f64 + 0.5) * dy[1],
                ];
                let density = match cfg.mode {
                    MeasureMode::FixedCovector { .. } => 1.0,
                    MeasureMode::Liouville => 0.5 / self.family.g0_inv().value(y).det().sqrt() * theta_weight,
                };
                let w = density * dy[0] * dy[1];
                let v = eta_at(y).and_then(|eta| self.integrand(urest, PhasePoint::new(y, eta)));
                match v {
                    Ok(v) => (w, Some(v)),
                    Err(e) => {
                        log::debug!("excluded beta node at y = {y:?}: {e}");
                        (w, None)
                    }
                }
            })
            .collect();
        let mut acc = Accumulated {
            value: 0.0,
            excluded: 0,
            out_of_box: 0,
            evaluated: outcomes.len(),
            nonzero: 0,
            min_nonzero: f64::INFINITY,
            max: 0.0,
        };
        let mut terms = Vec::with_capacity(outcomes.len());
        for (w, v) in outcomes {
            match v {
                Some(NodeValue::Value(f)) => {
                    if f > 0.0 {
                        acc.nonzero += 1;
                        acc.min_nonzero = acc.min_nonzero.min(f);
                        acc.max = acc.max.max(f);
                    }
                    terms.push(w * f);
                }
                Some(NodeValue::OutOfBox) => acc.out_of_box += 1,
                None => acc.excluded += 1,
            }
        }
        acc.value = pairwise_sum(&terms);
        Ok(acc)
    }

    /// `β(u″)` at the given resolution.
    fn beta_at(&self, urest: &[f64], points: usize, n_theta: usize) -> Result<Accumulated> {
        match self.cfg.mode {
            MeasureMode::FixedCovector { .. } => self.patch_integral(urest, None, points, 1.0),
            MeasureMode::Liouville => {
                let dth = TAU / n_theta as f64;
                let mut total = Accumulated {
                    value: 0.0,
                    excluded: 0,
                    out_of_box: 0,
                    evaluated: 0,
                    nonzero: 0,
                    min_nonzero: f64::INFINITY,
                    max: 0.0,
                };
                let mut values = Vec::with_capacity(n_theta);
                for l in 0..n_theta {
                    let a = self.patch_integral(urest, Some(l as f64 * dth), points, dth)?;
                    values.push(a.value);
                    total.excluded += a.excluded;
                    total.out_of_box += a.out_of_box;
                    total.evaluated += a.evaluated;
                    total.nonzero += a.nonzero;
                    total.min_nonzero = total.min_nonzero.min(a.min_nonzero);
                    total.max = total.max.max(a.max);
                }
                total.value = pairwise_sum(&values);
                Ok(total)
            }
        }
    }

    /// Tensor nodes in `u″ ∈ B^{k−2}(ε)` with plain `du″` weights.
    fn urest_nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let eps = self.family.epsilon();
        let dim = self.family.k() - 2;
        let rule: Vec<(f64, f64)> = plateau_panel_rule(self.cfg.urest_nodes)
            .into_iter()
            .map(|(s, w)| (s * eps, w * eps))
            .collect();
        let total = rule.len().pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                let mut u = vec![0.0; dim];
                let mut w = 1.0;
                for d in (0..dim).rev() {
                    let (s, ws) = rule[idx % rule.len()];
                    u[d] = s;
                    w *= ws;
                    idx /= rule.len();
                }
                (u, w)
            })
            .collect()
    }

    pub fn run(&self) -> Result<BetaReport> {
        let cfg = &self.cfg;
        let nodes = self.urest_nodes();
        let coarse_points = (cfg.patch_points / 2).max(2);
        let coarse_theta = (cfg.n_theta / 2).max(1);
        let mut out_nodes = Vec::with_capacity(nodes.len());
        let mut fine_terms = Vec::with_capacity(nodes.len());
        let mut coarse_terms = Vec::with_capacity(nodes.len());
        let mut excluded = 0;
        let mut out_of_box = 0;
        let mut evaluated = 0;
        let mut stats = IntegrandStats { evaluated: 0, nonzero: 0, min_nonzero: f64::INFINITY, max: 0.0 };
        for (urest, w) in nodes {
            let fine = self.beta_at(&urest, cfg.patch_points, cfg.n_theta)?;
            let coarse = self.beta_at(&urest, coarse_points, coarse_theta)?;
            excluded += fine.excluded + coarse.excluded;
            out_of_box += fine.out_of_box;
            evaluated += fine.evaluated + coarse.evaluated;
            stats.evaluated += fine.evaluated;
            stats.nonzero += fine.nonzero;
            stats.min_nonzero = stats.min_nonzero.min(fine.min_nonzero);
            stats.max = stats.max.max(fine.max);
            fine_terms.push(w * fine.value);
            coarse_terms.push(w * coarse.value);
            out_nodes.push(BetaNode { urest, weight: w, beta: fine.value });
        }
        if excluded as f64 > 0.01 * evaluated as f64 {
            return Err(Error::ExcessiveExclusions { excluded, total: evaluated });
        }
        if !stats.min_nonzero.is_finite() {
            stats.min_nonzero = 0.0;
        }
        let integral = pairwise_sum(&fine_terms);
        let integral_error = (integral - pairwise_sum(&coarse_terms)).abs();
        Ok(BetaReport {
            mode: cfg.mode,
            x: cfg.x,
            t: cfg.t,
            energy: cfg.energy,
            epsilon: self.family.epsilon(),
            k: self.family.k(),
            profile: self.measure.profile.clone(),
            mass: self.mass,
            time_factor: 1.0,
            patch_points: cfg.patch_points,
            n_theta: cfg.n_theta,
            nodes: out_nodes,
            integral,
            integral_error,
            excluded,
            out_of_box,
            stats,
        })
    }
}

/// One integrand value; `OutOfBox` nodes are reported rather than treated as failures.
pub fn beta_integrand(
    family: &MetricFamily,
    measure: &DeformationMeasure,
    cfg: &BetaConfig,
    urest: &[f64],
    z: PhasePoint,
) -> Result<NodeValue> {
    BetaContext::new(family, measure, cfg.clone())?.integrand(urest, z)
}

pub fn beta(family: &MetricFamily, measure: &DeformationMeasure, cfg: &BetaConfig) -> Result<BetaReport> {
    BetaContext::new(family, measure, cfg.clone())?.run()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mode: String,
    /// Liouville mode assumes quantum ergodicity, which flat-torus plane waves lack.
    pub hypothesis_violated: bool,
    pub x: [f64; 2],
    pub t: f64,
    pub h: f64,
    pub predicted: f64,
    pub predicted_error: f64,
    pub measured_variance: f64,
    pub variance_error: f64,
    pub relative_deviation: f64,
    /// `0.10 + 3|t|`.
    pub tolerance: f64,
    pub agrees: bool,
    /// `∫|φ|² dν` against the same prediction, a diagnostic.
    pub raw_abs_sq: f64,
    pub raw_relative_deviation: f64,
}

pub fn compare(beta: &BetaReport, moments: &MomentReport) -> Result<Comparison> {
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    if !(same(beta.t, moments.t) && same(beta.epsilon, moments.epsilon) && beta.k == moments.k) {
        return Err(Error::validation("compare", "beta and moment reports use different (t, ε, k)"));
    }
    if !(same(beta.x[0], moments.x[0]) && same(beta.x[1], moments.x[1])) {
        return Err(Error::validation("compare.x", "beta and moment reports use different points"));
    }
    if beta.profile != moments.profile {
        return Err(Error::validation("compare.profile", "cutoff profiles differ"));
    }
    let predicted = beta.integral;
    let measured = moments.variance.value;
    let relative_deviation = (measured - predicted).abs() / predicted.abs();
    let tolerance = 0.10 + 3.0 * beta.t.abs();
    Ok(Comparison {
        mode: beta.mode.name().into(),
        hypothesis_violated: matches!(beta.mode, MeasureMode::Liouville),
        x: beta.x,
        t: beta.t,
        h: moments.h,
        predicted,
        predicted_error: beta.integral_error,
        measured_variance: measured,
        variance_error: moments.variance.error,
        relative_deviation,
        tolerance,
        agrees: relative_deviation <= tolerance,
        raw_abs_sq: moments.raw_abs_sq.value,
        raw_relative_deviation: (moments.raw_abs_sq.value - predicted).abs() / predicted.abs(),
    })
}
