//! Survival probability `M(t) = |⟨φ^{(u)}_{h,t}, φ_h⟩|²` with the flat `dx` pairing.

use super::krylov::{propagate, KrylovOptions};
use super::operator::build_operator;
use super::state::flat_eigenfunction;
use crate::error::{Error, Result};
use crate::metric::MetricFamily;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoPoint {
    pub t: f64,
    pub echo: f64,
}

/// Echo on a non-decreasing grid of times `t ≥ 0`, propagating incrementally between them.
pub fn loschmidt_echo(
    family: &MetricFamily,
    u: &[f64],
    h: f64,
    m: [i64; 2],
    n: usize,
    t_grid: &[f64],
    opts: &KrylovOptions,
) -> Result<Vec<EchoPoint>> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("echo.times", "times must be non-negative and non-decreasing"));
    }
    let v0 = family.potential().mean_coefficient();
    let (phi, _) = flat_eigenfunction(m, h, n, v0);
    let op = build_operator(family, u, h, n)?;
    let mut state = phi.to_weighted(op.sqrt_rho());
    let mut now = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t > now {
            state = propagate(&state, &op, t - now, opts)?.0;
            now = t;
        }
        let echo = if t == 0.0 { 1.0 } else { state.inner_reference(&phi).norm_sqr() };
        out.push(EchoPoint { t, echo });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::smooth_torus;

    #[test]
    fn unperturbed_echo_is_one() {
        let f = smooth_torus(0.05);
        let ts = [0.0, 0.05, 0.1, 0.2];
        let e = loschmidt_echo(&f, &[0.0; 3], 0.2, [3, 4], 64, &ts, &KrylovOptions::default()).unwrap();
        assert_eq!(e[0].echo, 1.0);
        for p in &e {
            assert!((p.echo - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn perturbed_echo_stays_in_unit_interval() {
        let f = smooth_torus(0.05);
        let ts = [0.0, 0.1, 0.2];
        let e = loschmidt_echo(&f, &[0.05, -0.05, 0.05], 0.2, [3, 4], 64, &ts, &KrylovOptions::default()).unwrap();
        for p in &e {
            assert!(p.echo >= 0.0 && p.echo <= 1.0 + 1e-8);
        }
        assert!(e[2].echo < 1.0);
    }
}
