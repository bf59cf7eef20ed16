//! Quantum propagation of flat-torus eigenfunctions under `P_u(h)`.

pub mod echo;
pub mod krylov;
pub mod operator;
pub mod spectral;
pub mod state;

pub use echo::{loschmidt_echo, EchoPoint};
pub use krylov::{propagate, KrylovOptions, PropagationStats};
pub use operator::{build_operator, OperatorHandle};
pub use state::{
    check_resolution, default_resolution, evaluate, flat_eigenfunction, load_snapshot, read_snapshot, save_snapshot,
    write_snapshot, Gauge, Interpolator, SnapshotHeader, WaveState,
};

/// Propagate `φ_h` under `P_u(h)` for time `t` and return the physical value at `x`.
#[allow(clippy::too_many_arguments)]
pub fn propagated_value(
    family: &crate::MetricFamily,
    u: &[f64],
    h: f64,
    m: [i64; 2],
    n: usize,
    t: f64,
    interp: &Interpolator,
    opts: &KrylovOptions,
) -> crate::Result<num_complex::Complex64> {
    let (phi, _) = flat_eigenfunction(m, h, n, family.potential().mean_coefficient());
    if t == 0.0 {
        return Ok(interp.evaluate(&phi));
    }
    let op = build_operator(family, u, h, n)?;
    let (out, _) = propagate(&phi, &op, t, opts)?;
    Ok(interp.evaluate(&out))
}
