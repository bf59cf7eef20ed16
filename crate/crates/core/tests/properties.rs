use echolab::admissibility::{estimate_c, kappa, shell_covector, traceless_basis, AdmissibilityOptions};
use echolab::classical::uprime::{solve_base_point, solve_uprime, NewtonOptions};
use echolab::classical::{flow, FlowOptions, PhasePoint};
use echolab::config::ExperimentConfig;
use echolab::linalg::{det2, pairwise_sum, torus_distance, Sym2};
use echolab::manifest::ExperimentManifest;
use echolab::metric::{box_corners, split_at, traceless_conformal_split};
use echolab::moments::{estimate_moments, make_measure, MomentBudget};
use echolab::presets::{bumped_torus, constant_torus, smooth_torus};
use echolab::quantum::{build_operator, flat_eigenfunction, propagate, KrylovOptions};
use echolab::theory::{BetaConfig, BetaContext, MeasureMode, NodeValue};
use echolab::MetricFamily;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::TAU;

const EPS: f64 = 0.05;

fn families() -> Vec<MetricFamily> {
    vec![constant_torus(EPS), smooth_torus(EPS), bumped_torus(EPS)]
}

fn u_in_box() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-EPS..EPS, 3)
}

fn point() -> impl Strategy<Value = [f64; 2]> {
    (0.0..TAU, 0.0..TAU).prop_map(|(a, b)| [a, b])
}

fn shell_point(f: &MetricFamily, x: [f64; 2], theta: f64) -> PhasePoint {
    PhasePoint::new(x, shell_covector(f, x, 1.0, theta).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_metric_is_positive_definite_at_corners(x in point()) {
        for f in families() {
            for u in box_corners(3, EPS) {
                let g = f.inverse_metric(&u, x);
                prop_assert!(g.min_eigenvalue() > 0.0);
            }
        }
    }

    #[test]
    fn symbol_gradients_match_finite_differences(x in point(), xi in (-2.0..2.0f64, -2.0..2.0f64), u in u_in_box()) {
        let f = bumped_torus(EPS);
        let xi = [xi.0, xi.1];
        let d = 1e-6;
        let gx = f.symbol_grad_x(&u, x, xi);
        let gxi = f.symbol_grad_xi(&u, x, xi);
        for i in 0..2 {
            let (mut xp, mut xm, mut ep, mut em) = (x, x, xi, xi);
            xp[i] += d;
            xm[i] -= d;
            ep[i] += d;
            em[i] -= d;
            let fd_x = (f.symbol(&u, xp, xi) - f.symbol(&u, xm, xi)) / (2.0 * d);
            let fd_xi = (f.symbol(&u, x, ep) - f.symbol(&u, x, em)) / (2.0 * d);
            prop_assert!(rel(gx[i], fd_x) <= 1e-6, "d_x {}: {} vs {}", i, gx[i], fd_x);
            prop_assert!(rel(gxi[i], fd_xi) <= 1e-6, "d_xi {}: {} vs {}", i, gxi[i], fd_xi);
        }
    }

    #[test]
    fn conformal_split_is_orthogonal_and_exact(v in (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), g in (0.5..2.0f64, -0.3..0.3f64, 0.5..2.0f64)) {
        let v = Sym2::new(v.0, v.1, v.2);
        let g0_inv = Sym2::new(g.0, g.1, g.2);
        let (t, c) = split_at(v, g0_inv);
        let g0 = g0_inv.inverse().unwrap();
        prop_assert!(g0.frobenius(&t).abs() <= 1e-13);
        prop_assert!((t + c - v).max_abs() <= 1e-15 * v.max_abs().max(1.0) * 4.0);
    }

    #[test]
    fn mixed_hessian_is_constant_affine_in_u(x in point(), theta in 0.0..TAU) {
        // mixed Hessian columns are 2 H_j ξ, independent of u
        let f = smooth_torus(EPS);
        let z = shell_point(&f, x, theta);
        let m = f.mixed_hessian(z.x, z.xi, [0, 1]);
        let h0 = f.directions()[0].value(z.x).mul_vec(z.xi);
        let h1 = f.directions()[1].value(z.x).mul_vec(z.xi);
        for r in 0..2 {
            prop_assert!((m[r][0] - 2.0 * h0[r]).abs() <= 1e-13);
            prop_assert!((m[r][1] - 2.0 * h1[r]).abs() <= 1e-13);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive_sum(values in prop::collection::vec(-1e3..1e3f64, 0..300)) {
        let naive: f64 = values.iter().sum();
        let scale: f64 = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&values) - naive).abs() <= 1e-12 * scale);
    }

    #[test]
    fn density_is_even_and_vanishes_on_the_boundary(u in u_in_box(), axis in 0usize..3) {
        let m = make_measure(3, EPS).unwrap();
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        prop_assert_eq!(m.density(&u), m.density(&neg));
        let mut edge = u.clone();
        edge[axis] = if u[axis] >= 0.0 { EPS } else { -EPS };
        prop_assert_eq!(m.chi(&edge), 0.0);
    }

    #[test]
    fn manifest_hash_ignores_key_order(perm in Just(vec![0usize, 1, 2, 3, 4, 5, 6]).prop_shuffle()) {
        let entries = [
            r#""epsilon": 0.05"#, r#""k": 3"#, r#""a1": 1.0"#, r#""b1": 0.0"#,
            r#""a2": 0.0"#, r#""b2": 1.0"#, r#""a3": 1.0"#,
        ];
        let family = |order: &[usize]| order.iter().map(|&i| entries[i]).collect::<Vec<_>>().join(", ");
        let doc = |fam: String| format!(
            r#"{{"schema_version": 1, "family": {{{fam}}}, "physics": {{"energy": 1.0, "t": 0.1, "x": [1.0, 2.0], "m": [3, 4]}}}}"#
        );
        let a = ExperimentConfig::from_json(&doc(family(&[0, 1, 2, 3, 4, 5, 6]))).unwrap();
        let b = ExperimentConfig::from_json(&doc(family(&perm))).unwrap();
        let ha = ExperimentManifest::new("moments", 1, a).hash().unwrap();
        let hb = ExperimentManifest::new("moments", 1, b).hash().unwrap();
        prop_assert_eq!(ha, hb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_is_symplectic_and_conserves_energy(x in point(), theta in 0.0..TAU, s in -0.5..0.5f64, corner in 0usize..8) {
        let f = bumped_torus(EPS);
        let u = &box_corners(3, EPS)[corner];
        let z = shell_point(&f, x, theta);
        let jet = flow(&f, u, s, z, &FlowOptions::with_tol(1e-12)).unwrap();
        prop_assert!(jet.symplectic_defect() <= 1e-9);
        let e0 = f.symbol(u, z.x, z.xi);
        let e1 = f.symbol(u, jet.endpoint.x, jet.endpoint.xi);
        prop_assert!((e1 - e0).abs() <= 1e-10);
    }

    #[test]
    fn flow_has_the_group_property(x in point(), theta in 0.0..TAU, s1 in -0.3..0.3f64, s2 in -0.3..0.3f64, u in u_in_box()) {
        let f = smooth_torus(EPS);
        let opts = FlowOptions::with_tol(1e-12);
        let z = shell_point(&f, x, theta);
        let a = flow(&f, &u, s1, z, &opts).unwrap();
        let b = flow(&f, &u, s2, a.endpoint, &opts).unwrap();
        let c = flow(&f, &u, s1 + s2, z, &opts).unwrap();
        let dx = torus_distance(b.endpoint.x, c.endpoint.x);
        let dxi = (b.endpoint.xi[0] - c.endpoint.xi[0]).hypot(b.endpoint.xi[1] - c.endpoint.xi[1]);
        prop_assert!(dx.max(dxi) <= 1e-8, "dx {} dxi {}", dx, dxi);
    }

    #[test]
    fn u_sensitivity_matches_finite_differences(x in point(), theta in 0.0..TAU, u in prop::collection::vec(-0.04..0.04f64, 3)) {
        let f = smooth_torus(EPS);
        let opts = FlowOptions::with_tol(1e-13);
        let z = shell_point(&f, x, theta);
        let s = -0.1;
        let jet = flow(&f, &u, s, z, &opts).unwrap();
        let d = 1e-5;
        for j in 0..3 {
            let (mut up, mut um) = (u.clone(), u.clone());
            up[j] += d;
            um[j] -= d;
            let p = flow(&f, &up, s, z, &opts).unwrap();
            let m = flow(&f, &um, s, z, &opts).unwrap();
            let fd = [
                (p.unwrapped_x[0] - m.unwrapped_x[0]) / (2.0 * d),
                (p.unwrapped_x[1] - m.unwrapped_x[1]) / (2.0 * d),
                (p.endpoint.xi[0] - m.endpoint.xi[0]) / (2.0 * d),
                (p.endpoint.xi[1] - m.endpoint.xi[1]) / (2.0 * d),
            ];
            let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-2);
            for (r, v) in fd.iter().enumerate() {
                prop_assert!((jet.u_sensitivity[(r, j)] - v).abs() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn propagation_preserves_inner_products(c in prop::collection::vec(-1.0..1.0f64, 4), u in u_in_box()) {
        let f = smooth_torus(EPS);
        let (h, n, t) = (0.2, 32, 0.1);
        let op = build_operator(&f, &u, h, n).unwrap();
        let (p, _) = flat_eigenfunction([3, 4], h, n, 0.0);
        let (q, _) = flat_eigenfunction([5, 0], h, n, 0.0);
        let mix = |a: Complex64, b: Complex64| {
            let mut s = p.clone();
            for (z, w) in s.data.iter_mut().zip(&q.data) {
                *z = a * *z + b * w;
            }
            s.to_weighted(op.sqrt_rho())
        };
        let s1 = mix(Complex64::new(c[0], c[1]), Complex64::new(1.0, 0.0));
        let s2 = mix(Complex64::new(0.5, 0.0), Complex64::new(c[2], c[3]));
        let inner = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
        let area = s1.cell_area();
        let before = inner(&s1.data, &s2.data) * area;
        let kopts = KrylovOptions::default();
        let (a, _) = propagate(&s1, &op, t, &kopts).unwrap();
        let (b, _) = propagate(&s2, &op, t, &kopts).unwrap();
        let after = inner(&a.data, &b.data) * area;
        prop_assert!((after - before).norm() <= 1e-8);
    }
}

#[test]
fn traceless_basis_sizes() {
    for n in 2..=4 {
        assert_eq!(traceless_basis(n).len(), kappa(n));
        assert_eq!(kappa(n), (n * n + n - 2) / 2);
    }
}

#[test]
fn grid_split_reproduces_each_direction() {
    let f = smooth_torus(EPS);
    for h in f.directions() {
        let split = traceless_conformal_split(h, &f, 16);
        for (i, (t, c)) in split.traceless.iter().zip(&split.conformal).enumerate() {
            let x = [TAU * (i / 16) as f64 / 16.0, TAU * (i % 16) as f64 / 16.0];
            assert!((*t + *c - h.value(x)).max_abs() <= 1e-14);
        }
    }
}

#[test]
fn backward_flow_stays_in_the_energy_band() {
    let f = smooth_torus(EPS);
    let opts = AdmissibilityOptions::default();
    let c = estimate_c(&f, 1.0, &opts).unwrap();
    let zero = [0.0; 3];
    for i in 0..50 {
        let s = i as f64 / 50.0;
        let x = [TAU * s, TAU * (0.37 + 0.61 * s).fract()];
        let z = shell_point(&f, x, TAU * (0.13 + 0.77 * s).fract());
        let u = [EPS * (2.0 * s - 1.0), EPS * (1.0 - 2.0 * (0.3 + s).fract()), -EPS * 0.5];
        let jet = flow(&f, &u, -0.1, z, &opts.flow).unwrap();
        let e = f.symbol(&zero, jet.endpoint.x, jet.endpoint.xi);
        let size = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((e - 1.0).abs() <= c * size, "|p0 - E| = {} > c |u| = {}", (e - 1.0).abs(), c * size);
    }
}

#[test]
fn propagated_mass_concentrates_in_the_band_as_h_shrinks() {
    let f = smooth_torus(EPS);
    let u = [0.04, -0.03, 0.02];
    let kopts = KrylovOptions::default();
    let leakage = |m: [i64; 2]| {
        let h = 1.0 / ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt();
        let n = echolab::quantum::default_resolution(m);
        let op = build_operator(&f, &u, h, n).unwrap();
        let (phi, _) = flat_eigenfunction(m, h, n, 0.0);
        let (psi, _) = propagate(&phi.to_weighted(op.sqrt_rho()), &op, 0.1, &kopts).unwrap();
        psi.band_leakage(1.0 - 0.2, 1.0 + 0.2)
    };
    let coarse = leakage([3, 4]);
    let fine = leakage([12, 16]);
    assert!(fine < coarse, "leakage {coarse} at h=1/5, {fine} at h=1/20");
}

#[test]
fn second_moment_identity_is_exact() {
    let f = constant_torus(EPS);
    let m = make_measure(3, EPS).unwrap();
    let budget = MomentBudget { nodes_per_axis: 5, ..MomentBudget::default() };
    let r = estimate_moments(&f, &m, [1.0, 2.0], 0.1, 0.2, [3, 4], 3, &budget, 0).unwrap();
    let rebuilt = r.variance.value + r.mean_re.value * r.mean_re.value;
    assert!((r.second_moment_re.value - rebuilt).abs() <= 1e-15 * r.second_moment_re.value.abs().max(1e-300) * 8.0);
    let again = estimate_moments(&f, &m, [1.0, 2.0], 0.1, 0.2, [3, 4], 3, &budget, 0).unwrap();
    assert_eq!(r, again);
}

#[test]
fn nondegeneracy_scaling_converges_at_first_order() {
    let f = smooth_torus(EPS);
    let x = [1.0, 2.0];
    let newton = NewtonOptions { flow: FlowOptions::with_tol(1e-13), tol: 1e-13, ..NewtonOptions::default() };
    for l in 0..4 {
        let eta = shell_covector(&f, x, 1.0, TAU * (l as f64 + 0.3) / 4.0).unwrap();
        let target = det2(f.mixed_hessian(x, eta, [0, 1]));
        let err = |t: f64| {
            let (z, _) = solve_base_point(&f, &[0.0; 3], t, x, eta, &newton).unwrap();
            let sol = solve_uprime(&f, x, [0, 1], &[0.0], t, z, &newton).unwrap();
            (sol.jacobian.determinant() / (t * t) - target).abs()
        };
        let order = (err(0.02) / err(0.01)).log2();
        assert!(order >= 0.9, "observed order {order}");
    }
}

#[test]
fn beta_integrand_vanishes_at_the_urest_boundary_and_factors_for_constant_family() {
    let f = constant_torus(EPS);
    let measure = make_measure(3, EPS).unwrap();
    let xi0 = [0.6, 0.8];
    let cfg = BetaConfig::new([1.0, 2.0], 0.05, 1.0, [0, 1], MeasureMode::FixedCovector { xi0 });
    let ctx = BetaContext::new(&f, &measure, cfg).unwrap();
    let z = PhasePoint::new([1.0 + 2.0 * 0.05 * 0.6, 2.0 + 2.0 * 0.05 * 0.8], xi0);
    let value = |r: f64| match ctx.integrand(&[r], z).unwrap() {
        NodeValue::Value(v) => v,
        NodeValue::OutOfBox => 0.0,
    };
    assert_eq!(value(EPS), 0.0);
    assert_eq!(value(-EPS), 0.0);
    // away from χ², the integrand is the same constant at every u″
    let newton = NewtonOptions::default();
    let stripped = |r: f64| {
        let sol = solve_uprime(&f, [1.0, 2.0], [0, 1], &[r], 0.05, z, &newton).unwrap();
        value(r) / measure.chi(&sol.u).powi(2)
    };
    let reference = stripped(0.0);
    assert!(reference > 0.0);
    for r in [0.01, -0.02, 0.03] {
        let ratio = stripped(r);
        assert!((ratio - reference).abs() <= 1e-9 * reference, "{ratio} vs {reference}");
    }
}
