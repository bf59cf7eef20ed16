//! Metric families `g_u⁻¹ = g₀⁻¹ + Σ u_j h_j` on the flat torus and their symbols
//! `p_u(x, ξ) = |ξ|²_{g_u} + V(x)`.

use crate::error::{Error, Result};
use crate::field::{Bump, Jet, ScalarField};
use crate::linalg::Sym2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// A symmetric 2-tensor field with entries `(1,1)`, `(1,2) = (2,1)`, `(2,2)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymTensorField {
    pub xx: ScalarField,
    pub xy: ScalarField,
    pub yy: ScalarField,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TensorJet {
    pub value: Sym2,
    pub grad: [Sym2; 2],
    pub hess: [[Sym2; 2]; 2],
}

impl TensorJet {
    fn from_jets(xx: Jet, xy: Jet, yy: Jet) -> Self {
        let mk = |f: &dyn Fn(&Jet) -> f64| Sym2::new(f(&xx), f(&xy), f(&yy));
        TensorJet {
            value: mk(&|j| j.value),
            grad: [mk(&|j| j.grad[0]), mk(&|j| j.grad[1])],
            hess: [
                [mk(&|j| j.hess[0][0]), mk(&|j| j.hess[0][1])],
                [mk(&|j| j.hess[1][0]), mk(&|j| j.hess[1][1])],
            ],
        }
    }

    fn axpy(&mut self, a: f64, o: &TensorJet) {
        self.value = self.value + o.value * a;
        for i in 0..2 {
            self.grad[i] = self.grad[i] + o.grad[i] * a;
            for l in 0..2 {
                self.hess[i][l] = self.hess[i][l] + o.hess[i][l] * a;
            }
        }
    }
}

impl SymTensorField {
    pub fn zero() -> Self {
        SymTensorField::default()
    }

    pub fn identity() -> Self {
        SymTensorField::constant(Sym2::IDENTITY)
    }

    pub fn constant(m: Sym2) -> Self {
        SymTensorField {
            xx: ScalarField::constant(m.xx),
            xy: ScalarField::constant(m.xy),
            yy: ScalarField::constant(m.yy),
        }
    }

    /// The tensor `f(x)·m` for a scalar field `f` and a constant matrix `m`.
    pub fn scalar_times(f: &ScalarField, m: Sym2) -> Self {
        SymTensorField {
            xx: f.scaled(m.xx),
            xy: f.scaled(m.xy),
            yy: f.scaled(m.yy),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.xx.is_zero() && self.xy.is_zero() && self.yy.is_zero()
    }

    pub fn value(&self, x: [f64; 2]) -> Sym2 {
        Sym2::new(self.xx.value(x), self.xy.value(x), self.yy.value(x))
    }

    pub fn jet(&self, x: [f64; 2]) -> TensorJet {
        TensorJet::from_jets(self.xx.jet(x), self.xy.jet(x), self.yy.jet(x))
    }

    /// Attach the same bump to every entry.
    pub fn with_bump(self, bump: Option<Bump>) -> Self {
        SymTensorField {
            xx: self.xx.with_bump(bump),
            xy: self.xy.with_bump(bump),
            yy: self.yy.with_bump(bump),
        }
    }
}

/// Direction `u_α` with `∂_{u_α} g_u⁻¹ = a(x) g₀⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalDirection {
    pub index: usize,
    pub factor: ScalarField,
}

/// Closed disc on the torus used as the declared neighbourhood of a check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Region {
    /// Map a point of the unit square onto the disc (area-uniform).
    pub fn sample(&self, s: f64, r: f64) -> [f64; 2] {
        let rho = self.radius * r.sqrt();
        let ang = TAU * s;
        crate::linalg::wrap_point([
            self.center[0] + rho * ang.cos(),
            self.center[1] + rho * ang.sin(),
        ])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricFamily {
    g0_inv: SymTensorField,
    directions: Vec<SymTensorField>,
    epsilon: f64,
    potential: ScalarField,
    conformal: Option<ConformalDirection>,
    neighborhood: Option<Region>,
}

/// Everything the Hamiltonian flow needs from `p_u` at one phase point.
#[derive(Clone, Debug)]
pub struct HamiltonianJet {
    pub value: f64,
    /// Gradient in `(x₁, x₂, ξ₁, ξ₂)`.
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
    /// `∂_{u_j} ∇_z p_u` for each deformation direction.
    pub du_grad: Vec<[f64; 4]>,
}

impl MetricFamily {
    pub fn new(
        g0_inv: SymTensorField,
        directions: Vec<SymTensorField>,
        epsilon: f64,
        potential: ScalarField,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::validation("family.epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(MetricFamily {
            g0_inv,
            directions,
            epsilon,
            potential,
            conformal: None,
            neighborhood: None,
        })
    }

    /// Flat reference metric with `k` vanishing deformation directions.
    pub fn identity(k: usize, epsilon: f64) -> Result<Self> {
        MetricFamily::new(
            SymTensorField::identity(),
            vec![SymTensorField::zero(); k],
            epsilon,
            ScalarField::zero(),
        )
    }

    pub fn with_conformal(mut self, c: Option<ConformalDirection>) -> Self {
        self.conformal = c;
        self
    }

    pub fn with_neighborhood(mut self, region: Option<Region>) -> Self {
        self.neighborhood = region;
        self
    }

    pub fn with_potential(mut self, v: ScalarField) -> Self {
        self.potential = v;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::validation("family.epsilon", format!("must be positive, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn g0_inv(&self) -> &SymTensorField {
        &self.g0_inv
    }

    pub fn directions(&self) -> &[SymTensorField] {
        &self.directions
    }

    pub fn potential(&self) -> &ScalarField {
        &self.potential
    }

    pub fn conformal(&self) -> Option<&ConformalDirection> {
        self.conformal.as_ref()
    }

    pub fn neighborhood(&self) -> Option<&Region> {
        self.neighborhood.as_ref()
    }

    /// Deformation directions and reference metric are x-independent.
    pub fn is_constant_coefficient(&self) -> bool {
        let c = |t: &SymTensorField| t.xx.is_constant() && t.xy.is_constant() && t.yy.is_constant();
        c(&self.g0_inv) && self.directions.iter().all(c)
    }

    pub fn check_in_box(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.k() {
            return Err(Error::validation("u", format!("expected {} parameters, got {}", self.k(), u.len())));
        }
        let tol = 1e-12 * self.epsilon;
        if u.iter().any(|v| !(v.abs() <= self.epsilon + tol)) {
            return Err(Error::DomainViolation { u: u.to_vec(), epsilon: self.epsilon });
        }
        Ok(())
    }

    /// `g_u⁻¹(x)`.
    pub fn inverse_metric(&self, u: &[f64], x: [f64; 2]) -> Sym2 {
        let mut g = self.g0_inv.value(x);
        for (uj, h) in u.iter().zip(&self.directions) {
            if *uj != 0.0 {
                g = g + h.value(x) * *uj;
            }
        }
        g
    }

    fn inverse_metric_jet(&self, u: &[f64], x: [f64; 2]) -> (TensorJet, Vec<TensorJet>) {
        let mut g = self.g0_inv.jet(x);
        let hs: Vec<TensorJet> = self.directions.iter().map(|h| h.jet(x)).collect();
        for (uj, hj) in u.iter().zip(&hs) {
            g.axpy(*uj, hj);
        }
        (g, hs)
    }

    pub fn symbol(&self, u: &[f64], x: [f64; 2], xi: [f64; 2]) -> f64 {
        self.inverse_metric(u, x).quad(xi) + self.potential.value(x)
    }

    pub fn symbol_grad_xi(&self, u: &[f64], x: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
        let g = self.inverse_metric(u, x).mul_vec(xi);
        [2.0 * g[0], 2.0 * g[1]]
    }

    pub fn symbol_grad_x(&self, u: &[f64], x: [f64; 2], xi: [f64; 2]) -> [f64; 2] {
        let (g, _) = self.inverse_metric_jet(u, x);
        let v = self.potential.jet(x);
        [g.grad[0].quad(xi) + v.grad[0], g.grad[1].quad(xi) + v.grad[1]]
    }

    pub fn symbol_du(&self, x: [f64; 2], xi: [f64; 2]) -> Vec<f64> {
        self.directions.iter().map(|h| h.value(x).quad(xi)).collect()
    }

    /// Mixed Hessian `d_{u'} d_ξ p_u(x, ξ)`; row `i` is `∂_{ξ_i}`, column `j` is `∂_{u'_j}`.
    pub fn mixed_hessian(&self, x: [f64; 2], xi: [f64; 2], uprime: [usize; 2]) -> [[f64; 2]; 2] {
        let c0 = self.directions[uprime[0]].value(x).mul_vec(xi);
        let c1 = self.directions[uprime[1]].value(x).mul_vec(xi);
        [[2.0 * c0[0], 2.0 * c1[0]], [2.0 * c0[1], 2.0 * c1[1]]]
    }

    pub fn hamiltonian_jet(&self, u: &[f64], x: [f64; 2], xi: [f64; 2]) -> HamiltonianJet {
        let (g, hs) = self.inverse_metric_jet(u, x);
        let v = self.potential.jet(x);
        let gxi = g.value.mul_vec(xi);
        let d0 = g.grad[0].mul_vec(xi);
        let d1 = g.grad[1].mul_vec(xi);
        let grad = [
            g.grad[0].quad(xi) + v.grad[0],
            g.grad[1].quad(xi) + v.grad[1],
            2.0 * gxi[0],
            2.0 * gxi[1],
        ];
        let mut hess = [[0.0; 4]; 4];
        for i in 0..2 {
            for l in 0..2 {
                hess[i][l] = g.hess[i][l].quad(xi) + v.hess[i][l];
            }
        }
        // ∂_{x_i} ∂_{ξ_l} p = 2 (∂_i G ξ)_l
        let dx = [d0, d1];
        for i in 0..2 {
            for l in 0..2 {
                hess[i][2 + l] = 2.0 * dx[i][l];
                hess[2 + l][i] = 2.0 * dx[i][l];
            }
        }
        hess[2][2] = 2.0 * g.value.xx;
        hess[2][3] = 2.0 * g.value.xy;
        hess[3][2] = 2.0 * g.value.xy;
        hess[3][3] = 2.0 * g.value.yy;
        let du_grad = hs
            .iter()
            .map(|h| {
                let hxi = h.value.mul_vec(xi);
                [h.grad[0].quad(xi), h.grad[1].quad(xi), 2.0 * hxi[0], 2.0 * hxi[1]]
            })
            .collect();
        HamiltonianJet {
            value: g.value.quad(xi) + v.value,
            grad,
            hess,
            du_grad,
        }
    }

    /// Corner set of the closed box `[-ε, ε]^k`.
    pub fn box_corners(&self) -> Vec<Vec<f64>> {
        box_corners(self.k(), self.epsilon)
    }
}

pub fn box_corners(k: usize, epsilon: f64) -> Vec<Vec<f64>> {
    (0..1usize << k)
        .map(|mask| {
            (0..k)
                .map(|j| if mask >> j & 1 == 1 { epsilon } else { -epsilon })
                .collect()
        })
        .collect()
}

/// Coefficient fields of the two-torus model family.
#[derive(Clone, Debug)]
pub struct TorusExample {
    pub a1: ScalarField,
    pub b1: ScalarField,
    pub a2: ScalarField,
    pub b2: ScalarField,
    pub a3: ScalarField,
    pub bump: Option<Bump>,
    pub extra: Vec<SymTensorField>,
    pub epsilon: f64,
    pub potential: ScalarField,
}

/// Build `g_u⁻¹ = I + u₁[[a₁,b₁],[b₁,−a₁]] + u₂[[a₂,b₂],[b₂,−a₂]] + u₃ a₃ I + Σ u_{3+j} extra_j`,
/// every coefficient multiplied by the bump when one is given.
///
/// `a₃ ≡ 0` is accepted and leaves the family without a conformal direction; an `a₃`
/// that vanishes somewhere on the bump support without being identically zero is rejected.
pub fn build_torus_example(example: &TorusExample) -> Result<MetricFamily> {
    let bump = example.bump;
    let traceless = |a: &ScalarField, b: &ScalarField| SymTensorField {
        xx: a.clone(),
        xy: b.clone(),
        yy: a.scaled(-1.0),
    }
    .with_bump(bump);
    let h1 = traceless(&example.a1, &example.b1);
    let h2 = traceless(&example.a2, &example.b2);
    let h3 = SymTensorField::scalar_times(&example.a3, Sym2::IDENTITY).with_bump(bump);

    let conformal = if example.a3.is_zero() {
        None
    } else {
        check_nonvanishing(&example.a3, bump)?;
        Some(ConformalDirection {
            index: 2,
            factor: example.a3.clone().with_bump(bump),
        })
    };
    let neighborhood = bump.map(|b| Region { center: b.center, radius: 0.5 * b.radius });

    let mut directions = vec![h1, h2, h3];
    directions.extend(example.extra.iter().cloned());
    Ok(MetricFamily::new(
        SymTensorField::identity(),
        directions,
        example.epsilon,
        example.potential.clone(),
    )?
    .with_conformal(conformal)
    .with_neighborhood(neighborhood))
}

fn check_nonvanishing(a: &ScalarField, bump: Option<Bump>) -> Result<()> {
    const GRID: usize = 128;
    let mut min: Option<(f64, [f64; 2])> = None;
    let mut max: Option<(f64, [f64; 2])> = None;
    for i in 0..GRID {
        for j in 0..GRID {
            let x = [TAU * i as f64 / GRID as f64, TAU * j as f64 / GRID as f64];
            if let Some(b) = &bump {
                if !b.contains(x) {
                    continue;
                }
            }
            let v = a.value(x);
            if min.is_none_or(|(m, _)| v < m) {
                min = Some((v, x));
            }
            if max.is_none_or(|(m, _)| v > m) {
                max = Some((v, x));
            }
        }
    }
    if let (Some((lo, xl)), Some((hi, _))) = (min, max) {
        let floor = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        if lo <= floor && hi >= -floor {
            let x = if lo.abs() <= hi.abs() { xl } else { max.unwrap().1 };
            return Err(Error::ConformalZero { x, value: a.value(x) });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefiniteMargin {
    pub margin: f64,
    pub x: [f64; 2],
    pub u: Vec<f64>,
}

/// Smallest eigenvalue of `g_u⁻¹(x)` over a uniform grid and the corners of the box.
///
/// The family is affine in `u`, so the smallest eigenvalue is concave in `u` and its
/// minimum over the box is attained at a corner.
pub fn check_positive_definite(family: &MetricFamily, grid: usize) -> Result<DefiniteMargin> {
    let corners = family.box_corners();
    let mut best = DefiniteMargin { margin: f64::INFINITY, x: [0.0; 2], u: vec![0.0; family.k()] };
    for i in 0..grid {
        for j in 0..grid {
            let x = [TAU * i as f64 / grid as f64, TAU * j as f64 / grid as f64];
            let g0 = family.g0_inv.value(x);
            let hs: Vec<Sym2> = family.directions.iter().map(|h| h.value(x)).collect();
            for u in &corners {
                let mut g = g0;
                for (uj, h) in u.iter().zip(&hs) {
                    g = g + *h * *uj;
                }
                let lam = g.min_eigenvalue();
                if lam < best.margin {
                    best = DefiniteMargin { margin: lam, x, u: u.clone() };
                }
            }
        }
    }
    if best.margin <= 0.0 {
        return Err(Error::NotPositiveDefinite { x: best.x, u: best.u, min_eig: best.margin });
    }
    Ok(best)
}

/// Pointwise split `v = (v − (tr_{g₀}v / n) g₀⁻¹) + (tr_{g₀}v / n) g₀⁻¹` of a contravariant tensor.
pub fn split_at(v: Sym2, g0_inv: Sym2) -> (Sym2, Sym2) {
    let g0 = g0_inv.inverse().expect("reference metric must be invertible");
    let trace = g0.frobenius(&v);
    let conformal = g0_inv * (trace / 2.0);
    (v - conformal, conformal)
}

/// Grid samples of the traceless and conformal parts of a tensor field.
#[derive(Clone, Debug)]
pub struct TensorSplit {
    pub grid: usize,
    pub traceless: Vec<Sym2>,
    pub conformal: Vec<Sym2>,
}

pub fn traceless_conformal_split(tensor: &SymTensorField, family: &MetricFamily, grid: usize) -> TensorSplit {
    let mut traceless = Vec::with_capacity(grid * grid);
    let mut conformal = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let x = [TAU * i as f64 / grid as f64, TAU * j as f64 / grid as f64];
            let (t, c) = split_at(tensor.value(x), family.g0_inv.value(x));
            traceless.push(t);
            conformal.push(c);
        }
    }
    TensorSplit { grid, traceless, conformal }
}
