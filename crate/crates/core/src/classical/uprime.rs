//! Solving `π G^{−t}_{(u′, u″)}(y, η) = x` for the two selected parameters `u′`.

use super::flow::{integrate, FlowJet, FlowOptions, PhasePoint};
use crate::error::{Error, Result};
use crate::linalg::{torus_displacement, torus_distance};
use crate::metric::MetricFamily;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Target torus distance of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates with some `|u′_i|` above this multiple of ε are declared out of the box.
    pub box_slack: f64,
    pub flow: FlowOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-11, max_iter: 30, box_slack: 1.5, flow: FlowOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct UprimeSolution {
    pub uprime: [f64; 2],
    /// Full parameter vector `(u′, u″)` in family order.
    pub u: Vec<f64>,
    /// `d_{u′}(π G^{−t})` at the solution.
    pub jacobian: Matrix2<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub jet: FlowJet,
}

/// Insert `u′` at `indices` and fill the remaining slots with `u″` in order.
pub fn assemble_u(k: usize, indices: [usize; 2], uprime: [f64; 2], urest: &[f64]) -> Vec<f64> {
    let mut u = Vec::with_capacity(k);
    let mut rest = urest.iter();
    for j in 0..k {
        if j == indices[0] {
            u.push(uprime[0]);
        } else if j == indices[1] {
            u.push(uprime[1]);
        } else {
            u.push(*rest.next().unwrap_or(&0.0));
        }
    }
    u
}

fn validate_indices(family: &MetricFamily, indices: [usize; 2], urest: &[f64]) -> Result<()> {
    let k = family.k();
    if indices[0] == indices[1] || indices[0] >= k || indices[1] >= k {
        return Err(Error::validation("uprime_indices", format!("need two distinct indices below {k}, got {indices:?}")));
    }
    if urest.len() != k - 2 {
        return Err(Error::validation("u_rest", format!("expected {} values, got {}", k - 2, urest.len())));
    }
    if urest.iter().any(|v| !(v.abs() <= family.epsilon() * (1.0 + 1e-12))) {
        return Err(Error::DomainViolation { u: urest.to_vec(), epsilon: family.epsilon() });
    }
    Ok(())
}

/// Newton iteration from `start` (usually `0`) with a halving line search on the residual.
#[allow(clippy::too_many_arguments)]
pub fn solve_uprime_from(
    family: &MetricFamily,
    x: [f64; 2],
    indices: [usize; 2],
    urest: &[f64],
    t: f64,
    z: PhasePoint,
    start: [f64; 2],
    opts: &NewtonOptions,
) -> Result<UprimeSolution> {
    validate_indices(family, indices, urest)?;
    let k = family.k();
    let eps = family.epsilon();
    let limit = opts.box_slack * eps;
    let eval = |up: [f64; 2]| -> Result<(FlowJet, Vector2<f64>)> {
        let u = assemble_u(k, indices, up, urest);
        let jet = integrate(family, &u, -t, z, &opts.flow)?;
        let d = torus_displacement(jet.endpoint.x, x);
        Ok((jet, Vector2::new(d[0], d[1])))
    };

    let mut up = start;
    let (mut jet, mut r) = eval(up)?;
    let mut iterations = 0;
    loop {
        if r.norm() <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: r.norm() });
        }
        iterations += 1;
        let jac = jet.position_sensitivity(indices);
        let step = jac
            .lu()
            .solve(&(-r))
            .ok_or_else(|| Error::Numerical(format!("singular u' Jacobian at u' = {up:?}")))?;
        let full = [up[0] + step[0], up[1] + step[1]];
        if full.iter().any(|v| v.abs() > limit) {
            // the map is nearly affine in u′, so a full step this far out means the root is outside
            return Err(Error::OutOfBox { uprime: full.to_vec() });
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let cand = [up[0] + alpha * step[0], up[1] + alpha * step[1]];
            let (cj, cr) = eval(cand)?;
            if cr.norm() < r.norm() {
                accepted = Some((cand, cj, cr));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, cj, cr)) => {
                up = cand;
                jet = cj;
                r = cr;
            }
            None => return Err(Error::NoConvergence { iterations, residual: r.norm() }),
        }
    }
    if up.iter().any(|v| v.abs() > eps * (1.0 + 1e-12)) {
        return Err(Error::OutOfBox { uprime: up.to_vec() });
    }
    let jacobian = jet.position_sensitivity(indices);
    Ok(UprimeSolution {
        uprime: up,
        u: assemble_u(k, indices, up, urest),
        jacobian,
        residual: r.norm(),
        iterations,
        jet,
    })
}

/// The root continuous from `u′ = 0`.
pub fn solve_uprime(
    family: &MetricFamily,
    x: [f64; 2],
    indices: [usize; 2],
    urest: &[f64],
    t: f64,
    z: PhasePoint,
    opts: &NewtonOptions,
) -> Result<UprimeSolution> {
    solve_uprime_from(family, x, indices, urest, t, z, [0.0, 0.0], opts)
}

/// Restart Newton from the four corners of the `u′` box and count distinct roots inside it.
pub fn probe_multiplicity(
    family: &MetricFamily,
    x: [f64; 2],
    indices: [usize; 2],
    urest: &[f64],
    t: f64,
    z: PhasePoint,
    opts: &NewtonOptions,
) -> usize {
    let eps = family.epsilon();
    let mut roots: Vec<[f64; 2]> = Vec::new();
    let starts = [[0.0, 0.0], [eps, eps], [eps, -eps], [-eps, eps], [-eps, -eps]];
    for s in starts {
        if let Ok(sol) = solve_uprime_from(family, x, indices, urest, t, z, s, opts) {
            let fresh = roots
                .iter()
                .all(|r| (r[0] - sol.uprime[0]).hypot(r[1] - sol.uprime[1]) > 1e-6 * eps);
            if fresh {
                roots.push(sol.uprime);
            }
        }
    }
    if roots.len() > 1 {
        log::warn!("{} distinct u' roots at x = {:?}, z = {:?}; keeping the one continuous from 0", roots.len(), x, z);
    }
    roots.len()
}

/// Newton in the base point: find `y` with `π G_u^{−t}(y, η) = x` for fixed `u` and `η`.
pub fn solve_base_point(
    family: &MetricFamily,
    u: &[f64],
    t: f64,
    x: [f64; 2],
    eta: [f64; 2],
    opts: &NewtonOptions,
) -> Result<(PhasePoint, FlowJet)> {
    family.check_in_box(u)?;
    // first-order guess: the backward flow moves x by −t ∂_ξ p
    let v = family.symbol_grad_xi(u, x, eta);
    let mut y = [x[0] + t * v[0], x[1] + t * v[1]];
    for iter in 0..=opts.max_iter {
        let z = PhasePoint::new(y, eta);
        let jet = integrate(family, u, -t, z, &opts.flow)?;
        let d = torus_displacement(jet.endpoint.x, x);
        let res = d[0].hypot(d[1]);
        if res <= opts.tol {
            return Ok((z, jet));
        }
        if iter == opts.max_iter {
            return Err(Error::NoConvergence { iterations: iter, residual: res });
        }
        let step = jet
            .spatial_block()
            .lu()
            .solve(&Vector2::new(-d[0], -d[1]))
            .ok_or_else(|| Error::Numerical("singular spatial block in base-point solve".into()))?;
        y = [y[0] + step[0], y[1] + step[1]];
    }
    unreachable!()
}

/// `‖π G_u^{−t}(y, η) − (y − 2t g_u⁻¹(y) η)‖` on the torus.
pub fn taylor_defect(family: &MetricFamily, u: &[f64], t: f64, z: PhasePoint, opts: &FlowOptions) -> Result<f64> {
    let jet = super::flow::flow(family, u, -t, z, opts)?;
    let g = family.inverse_metric(u, z.x).mul_vec(z.xi);
    let linear = [z.x[0] - 2.0 * t * g[0], z.x[1] - 2.0 * t * g[1]];
    Ok(torus_distance(jet.endpoint.x, linear))
}
