//! Classical dynamics of `p_u`: flow with monodromy, the `u′` solve and shell quadrature.

pub mod flow;
pub mod shell;
pub mod uprime;

pub use flow::{flow, spatial_jacobian, FlowJet, FlowOptions, PhasePoint, TraceRow};
pub use shell::{shell_quadrature, ShellNode, ShellQuadrature};
pub use uprime::{solve_base_point, solve_uprime, taylor_defect, NewtonOptions, UprimeSolution};

/// Write a recorded trajectory as CSV.
pub fn write_trace<W: std::io::Write>(rows: &[TraceRow], header: &[String], out: W) -> crate::Result<()> {
    let mut w = crate::manifest::commented_csv(out, header)?;
    w.write_record(["t", "x1", "x2", "xi1", "xi2", "energy_drift"])?;
    for r in rows {
        w.serialize((r.t, r.x1, r.x2, r.xi1, r.xi2, r.energy_drift))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricFamily;
    use crate::presets::{bumped_torus, constant_torus, smooth_torus};

    fn opts() -> FlowOptions {
        FlowOptions::with_tol(1e-12)
    }

    #[test]
    fn free_motion_on_flat_torus() {
        let f = MetricFamily::identity(3, 0.05).unwrap();
        let z = PhasePoint::new([1.0, 2.0], [0.6, 0.8]);
        let t = 0.3;
        let jet = flow(&f, &[0.0; 3], -t, z, &opts()).unwrap();
        assert!((jet.endpoint.x[0] - (1.0 - 2.0 * t * 0.6)).abs() < 1e-12);
        assert!((jet.endpoint.x[1] - (2.0 - 2.0 * t * 0.8)).abs() < 1e-12);
        let m = jet.monodromy;
        for i in 0..2 {
            assert!((m[(i, i)] - 1.0).abs() < 1e-12);
            assert!((m[(i, i + 2)] + 2.0 * t).abs() < 1e-12);
            assert!(m[(i + 2, i)].abs() < 1e-12);
        }
        assert!((spatial_jacobian(&f, &[0.0; 3], t, z, &opts()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_and_symplecticity_on_bumped_family() {
        let f = bumped_torus(0.05);
        let u = [0.02, 0.01, 0.03];
        let z = PhasePoint::new([2.5, 3.0], [0.7, -0.7]);
        let jet = flow(&f, &u, -0.5, z, &opts()).unwrap();
        assert!(jet.energy_drift.abs() <= 1e-10, "drift {}", jet.energy_drift);
        assert!(jet.symplectic_defect() <= 1e-9);
        assert!((jet.monodromy.determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn sensitivity_matches_finite_differences() {
        let f = smooth_torus(0.05);
        let u = [0.01, -0.02, 0.015];
        let z = PhasePoint::new([0.4, 5.0], [0.9, 0.3]);
        let jet = flow(&f, &u, 0.4, z, &opts()).unwrap();
        let h = 1e-5;
        for j in 0..3 {
            let mut up = u;
            let mut um = u;
            up[j] += h;
            um[j] -= h;
            let a = flow(&f, &up, 0.4, z, &opts()).unwrap();
            let b = flow(&f, &um, 0.4, z, &opts()).unwrap();
            let fd = [
                (a.unwrapped_x[0] - b.unwrapped_x[0]) / (2.0 * h),
                (a.unwrapped_x[1] - b.unwrapped_x[1]) / (2.0 * h),
                (a.endpoint.xi[0] - b.endpoint.xi[0]) / (2.0 * h),
                (a.endpoint.xi[1] - b.endpoint.xi[1]) / (2.0 * h),
            ];
            let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (r, v) in fd.iter().enumerate() {
                let s = jet.u_sensitivity[(r, j)];
                assert!((s - v).abs() <= 1e-4 * scale, "row {r} col {j}: {s} vs {v}");
            }
        }
    }

    #[test]
    fn group_property() {
        let f = smooth_torus(0.05);
        let u = [0.03, 0.0, -0.01];
        let z = PhasePoint::new([3.0, 1.0], [0.2, 0.95]);
        let a = flow(&f, &u, 0.2, z, &opts()).unwrap();
        let b = flow(&f, &u, 0.3, a.endpoint, &opts()).unwrap();
        let c = flow(&f, &u, 0.5, z, &opts()).unwrap();
        let d = crate::linalg::torus_distance(b.endpoint.x, c.endpoint.x)
            + (b.endpoint.xi[0] - c.endpoint.xi[0]).abs()
            + (b.endpoint.xi[1] - c.endpoint.xi[1]).abs();
        assert!(d < 1e-8);
    }

    #[test]
    fn flow_rejects_out_of_box_and_long_times() {
        let f = constant_torus(0.05);
        let z = PhasePoint::new([0.0, 0.0], [1.0, 0.0]);
        assert!(matches!(flow(&f, &[0.1, 0.0, 0.0], 0.1, z, &opts()), Err(crate::Error::DomainViolation { .. })));
        assert!(matches!(flow(&f, &[0.0; 3], 5.0, z, &opts()), Err(crate::Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn uprime_consistency_at_zero() {
        let f = smooth_torus(0.05);
        let z = PhasePoint::new([1.0, 2.0], [0.6, 0.8]);
        let t = 0.1;
        let x = flow(&f, &[0.0; 3], -t, z, &opts()).unwrap().endpoint.x;
        let sol = solve_uprime(&f, x, [0, 1], &[0.0], t, z, &NewtonOptions::default()).unwrap();
        assert!(sol.uprime[0].abs() < 1e-12 && sol.uprime[1].abs() < 1e-12);
    }

    #[test]
    fn uprime_converges_and_jacobian_scales_with_t() {
        let f = constant_torus(0.05);
        let z = PhasePoint::new([1.0, 2.0], [0.6, 0.8]);
        let t = 0.1;
        // endpoint of the flow with a known u′
        let target = flow(&f, &[0.01, -0.02, 0.005], -t, z, &opts()).unwrap().endpoint.x;
        let sol = solve_uprime(&f, target, [0, 1], &[0.005], t, z, &NewtonOptions::default()).unwrap();
        assert!((sol.uprime[0] - 0.01).abs() < 1e-9);
        assert!((sol.uprime[1] + 0.02).abs() < 1e-9);
        assert!(sol.residual <= 1e-10);
        // constant coefficients: the Jacobian is exactly −t · d_{u′}d_ξ p
        let mh = f.mixed_hessian(z.x, z.xi, [0, 1]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((sol.jacobian[(i, j)] + t * mh[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn uprime_out_of_box() {
        let f = constant_torus(0.05);
        let z = PhasePoint::new([1.0, 2.0], [0.6, 0.8]);
        let x = [1.5, 2.5];
        let err = solve_uprime(&f, x, [0, 1], &[0.0], 0.1, z, &NewtonOptions::default()).unwrap_err();
        assert!(matches!(err, crate::Error::OutOfBox { .. }));
    }

    #[test]
    fn base_point_solve() {
        let f = smooth_torus(0.05);
        let u = [0.02, -0.01, 0.0];
        let (z, jet) = solve_base_point(&f, &u, 0.1, [1.0, 2.0], [0.6, 0.8], &NewtonOptions::default()).unwrap();
        assert!(crate::linalg::torus_distance(jet.endpoint.x, [1.0, 2.0]) < 1e-10);
        assert_eq!(z.xi, [0.6, 0.8]);
    }

    #[test]
    fn flat_shell_mass_and_mean_zero() {
        let f = MetricFamily::identity(3, 0.05).unwrap();
        let q = shell_quadrature(&f, 1.0, 16, 16, 0.1).unwrap();
        let pi = std::f64::consts::PI;
        assert!((q.total_mass - 4.0 * pi.powi(3)).abs() < 1e-10);
        assert!((q.average(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!(q.average(|n| n.y[0].cos()).abs() < 1e-14);
        for n in &q.nodes {
            assert!((f.symbol(&[0.0; 3], n.y, n.eta) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn shell_rejects_turning_points() {
        let f = MetricFamily::identity(3, 0.05)
            .unwrap()
            .with_potential(crate::field::ScalarField::constant(0.95));
        assert!(matches!(shell_quadrature(&f, 1.0, 8, 8, 0.1), Err(crate::Error::Caustic { .. })));
    }

    #[test]
    fn taylor_defect_is_second_order() {
        let f = smooth_torus(0.05);
        let u = [0.01, 0.02, -0.03];
        let z = PhasePoint::new([2.0, 4.0], [0.8, -0.6]);
        let a = taylor_defect(&f, &u, 0.1, z, &opts()).unwrap();
        let b = taylor_defect(&f, &u, 0.05, z, &opts()).unwrap();
        assert!((a / b).log2() > 1.9);
    }
}
