//! Ready-made metric families used by the shipped configurations and the test suites.

use crate::field::{Bump, FourierTerm, ScalarField};
use crate::metric::{build_torus_example, MetricFamily, TorusExample};
use std::f64::consts::PI;

fn series(terms: &[([i32; 2], f64, f64)]) -> ScalarField {
    ScalarField::fourier(
        terms
            .iter()
            .map(|&(k, cos, sin)| FourierTerm { k, cos, sin })
            .collect(),
    )
}

/// Constant coefficients `a₁ = b₂ = a₃ = 1`, `b₁ = a₂ = 0`, no bump.
pub fn constant_torus(epsilon: f64) -> MetricFamily {
    build_torus_example(&TorusExample {
        a1: ScalarField::constant(1.0),
        b1: ScalarField::zero(),
        a2: ScalarField::zero(),
        b2: ScalarField::constant(1.0),
        a3: ScalarField::constant(1.0),
        bump: None,
        extra: vec![],
        epsilon,
        potential: ScalarField::zero(),
    })
    .expect("constant torus family is valid")
}

/// Trigonometric-polynomial coefficients; `a₁b₂ − a₂b₁ ≥ 0.48` and `a₃ ≥ 0.7` everywhere.
pub fn smooth_torus_example(epsilon: f64) -> TorusExample {
    TorusExample {
        a1: series(&[([0, 0], 1.0, 0.0), ([0, 1], 0.3, 0.0)]),
        b1: series(&[([1, 0], 0.0, 0.2)]),
        a2: series(&[([1, 1], 0.2, 0.0)]),
        b2: series(&[([0, 0], 1.0, 0.0), ([0, 1], 0.0, 0.25)]),
        a3: series(&[([0, 0], 1.0, 0.0), ([1, -1], 0.3, 0.0)]),
        bump: None,
        extra: vec![],
        epsilon,
        potential: ScalarField::zero(),
    }
}

pub fn smooth_torus(epsilon: f64) -> MetricFamily {
    build_torus_example(&smooth_torus_example(epsilon)).expect("smooth torus family is valid")
}

/// The smooth family localized by a bump of radius 2.5 centred at (π, π).
pub fn bumped_torus(epsilon: f64) -> MetricFamily {
    let mut example = smooth_torus_example(epsilon);
    example.bump = Some(Bump::new([PI, PI], 2.5).expect("radius below π"));
    build_torus_example(&example).expect("bumped torus family is valid")
}

/// `h₂ = 2h₁`: the two traceless directions are parallel, so condition A fails everywhere.
pub fn parallel_torus(epsilon: f64) -> MetricFamily {
    build_torus_example(&TorusExample {
        a1: ScalarField::constant(1.0),
        b1: ScalarField::zero(),
        a2: ScalarField::constant(2.0),
        b2: ScalarField::zero(),
        a3: ScalarField::constant(1.0),
        bump: None,
        extra: vec![],
        epsilon,
        potential: ScalarField::zero(),
    })
    .expect("parallel torus family is valid")
}
