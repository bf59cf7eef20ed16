//! Hamiltonian flow of `p_u` with its variational equations.
//!
//! The augmented state is integrated with the Dormand–Prince 5(4) pair:
//! phase point `z = (x, ξ)`, monodromy `M = ∂z(s)/∂z(0)` and parameter sensitivity
//! `S = ∂z(s)/∂u`, driven by
//!
//! ```text
//! ż = J ∇p_u(z),   Ṁ = J ∇²p_u(z) M,   Ṡ = J ∇²p_u(z) S + J ∂_u∇p_u(z)
//! ```
//!
//! with `J = [[0, I], [−I, 0]]`.

use crate::error::{Error, Result};
use crate::linalg::wrap_point;
use crate::metric::MetricFamily;
use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: [f64; 2],
    pub xi: [f64; 2],
}

impl PhasePoint {
    pub fn new(x: [f64; 2], xi: [f64; 2]) -> Self {
        PhasePoint { x: wrap_point(x), xi }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Absolute and relative tolerance of the embedded error estimate.
    pub tol: f64,
    /// Largest admissible |s|.
    pub s_max: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { tol: 1e-12, s_max: 2.0, max_steps: 1_000_000, record_trace: false }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        FlowOptions { tol, ..FlowOptions::default() }
    }
}

/// One accepted step of a recorded trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub energy_drift: f64,
}

#[derive(Clone, Debug)]
pub struct FlowJet {
    pub start: PhasePoint,
    pub endpoint: PhasePoint,
    /// Endpoint position before wrapping onto the torus.
    pub unwrapped_x: [f64; 2],
    pub monodromy: Matrix4<f64>,
    /// 4×k sensitivity of the endpoint to the deformation parameters.
    pub u_sensitivity: DMatrix<f64>,
    pub energy_drift: f64,
    pub time: f64,
    pub steps: usize,
    pub rejected: usize,
    pub trace: Vec<TraceRow>,
}

pub fn symplectic_form() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}

impl FlowJet {
    /// max |MᵀJM − J|.
    pub fn symplectic_defect(&self) -> f64 {
        let j = symplectic_form();
        (self.monodromy.transpose() * j * self.monodromy - j).amax()
    }

    /// `d_x(π G)`: the spatial block of the monodromy.
    pub fn spatial_block(&self) -> Matrix2<f64> {
        self.monodromy.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// `d_{u'}(π G)` for the selected parameter columns.
    pub fn position_sensitivity(&self, indices: [usize; 2]) -> Matrix2<f64> {
        Matrix2::new(
            self.u_sensitivity[(0, indices[0])],
            self.u_sensitivity[(0, indices[1])],
            self.u_sensitivity[(1, indices[0])],
            self.u_sensitivity[(1, indices[1])],
        )
    }
}

// The system is autonomous, so the node abscissae are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct Augmented<'a> {
    family: &'a MetricFamily,
    u: &'a [f64],
    k: usize,
}

impl Augmented<'_> {
    fn dim(&self) -> usize {
        20 + 4 * self.k
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let k = self.k;
        let jet = self.family.hamiltonian_jet(self.u, [y[0], y[1]], [y[2], y[3]]);
        // A = J ∇²p
        let mut a = [[0.0; 4]; 4];
        for c in 0..4 {
            a[0][c] = jet.hess[2][c];
            a[1][c] = jet.hess[3][c];
            a[2][c] = -jet.hess[0][c];
            a[3][c] = -jet.hess[1][c];
        }
        out[0] = jet.grad[2];
        out[1] = jet.grad[3];
        out[2] = -jet.grad[0];
        out[3] = -jet.grad[1];
        for r in 0..4 {
            for c in 0..4 {
                let mut acc = 0.0;
                for (l, arl) in a[r].iter().enumerate() {
                    acc += arl * y[4 + 4 * l + c];
                }
                out[4 + 4 * r + c] = acc;
            }
        }
        for (j, dg) in jet.du_grad.iter().enumerate() {
            let forcing = [dg[2], dg[3], -dg[0], -dg[1]];
            for r in 0..4 {
                let mut acc = forcing[r];
                for (l, arl) in a[r].iter().enumerate() {
                    acc += arl * y[20 + l * k + j];
                }
                out[20 + r * k + j] = acc;
            }
        }
    }
}

/// Integrate the flow of `p_u` for signed time `s` starting at `z0`.
pub fn flow(family: &MetricFamily, u: &[f64], s: f64, z0: PhasePoint, opts: &FlowOptions) -> Result<FlowJet> {
    family.check_in_box(u)?;
    integrate(family, u, s, z0, opts)
}

/// As [`flow`] but without the parameter-box check; Newton iterates may step outside the box.
pub(crate) fn integrate(family: &MetricFamily, u: &[f64], s: f64, z0: PhasePoint, opts: &FlowOptions) -> Result<FlowJet> {
    if !(s.abs() <= opts.s_max) {
        return Err(Error::TimeOutOfRange { s, s_max: opts.s_max });
    }
    let sys = Augmented { family, u, k: family.k() };
    let n = sys.dim();
    let mut y = vec![0.0; n];
    y[0] = z0.x[0];
    y[1] = z0.x[1];
    y[2] = z0.xi[0];
    y[3] = z0.xi[1];
    for d in 0..4 {
        y[4 + 5 * d] = 1.0;
    }
    let energy0 = family.symbol(u, z0.x, z0.xi);
    let mut trace = Vec::new();
    let push_trace = |trace: &mut Vec<TraceRow>, t: f64, y: &[f64]| {
        let x = wrap_point([y[0], y[1]]);
        trace.push(TraceRow {
            t,
            x1: x[0],
            x2: x[1],
            xi1: y[2],
            xi2: y[3],
            energy_drift: family.symbol(u, [y[0], y[1]], [y[2], y[3]]) - energy0,
        });
    };
    if opts.record_trace {
        push_trace(&mut trace, 0.0, &y);
    }

    let mut t = 0.0;
    let mut steps = 0;
    let mut rejected = 0;
    if s != 0.0 {
        let dir = s.signum();
        let mut h = dir * s.abs().min(0.01);
        let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
        let mut stage = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        sys.rhs(&y, &mut k[0]);
        loop {
            let remaining = s - t;
            if remaining.abs() <= 1e-15 * s.abs() {
                break;
            }
            if h.abs() < 1e-14 * s.abs().max(1.0) {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            if h.abs() > remaining.abs() {
                h = remaining;
            }
            if steps + rejected >= opts.max_steps {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            for st in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (l, kl) in k.iter().enumerate().take(st) {
                        acc += h * A[st][l] * kl[i];
                    }
                    stage[i] = acc;
                }
                sys.rhs(&stage, &mut k[st]);
            }
            // stage 7 evaluated the fifth-order solution (FSAL)
            y_new.copy_from_slice(&stage);
            let mut err = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for (l, kl) in k.iter().enumerate() {
                    e += E[l] * kl[i];
                }
                e *= h;
                let sc = opts.tol + opts.tol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / n as f64).sqrt();
            if err <= 1.0 {
                t += h;
                y.copy_from_slice(&y_new);
                k.swap(0, 6);
                steps += 1;
                if opts.record_trace {
                    push_trace(&mut trace, t, &y);
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h *= fac;
            } else {
                rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
    }

    let monodromy = Matrix4::from_fn(|r, c| y[4 + 4 * r + c]);
    let kk = family.k();
    let u_sensitivity = DMatrix::from_fn(4, kk, |r, j| y[20 + r * kk + j]);
    let energy_drift = family.symbol(u, [y[0], y[1]], [y[2], y[3]]) - energy0;
    Ok(FlowJet {
        start: z0,
        endpoint: PhasePoint::new([y[0], y[1]], [y[2], y[3]]),
        unwrapped_x: [y[0], y[1]],
        monodromy,
        u_sensitivity,
        energy_drift,
        time: s,
        steps,
        rejected,
        trace,
    })
}

/// `|det d_x(π G_u^{−t})(z)|`.
pub fn spatial_jacobian(family: &MetricFamily, u: &[f64], t: f64, z: PhasePoint, opts: &FlowOptions) -> Result<f64> {
    let jet = flow(family, u, -t, z, opts)?;
    Ok(jet.spatial_block().determinant().abs())
}
