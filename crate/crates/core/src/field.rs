//! Smooth periodic scalar fields on [0, 2π)² with closed-form first and second derivatives.
//!
//! A field is a truncated Fourier series, optionally multiplied by a radial bump
//! `b(r) = exp(1 - 1/(1 - (r/r0)²))` centred at a point of the torus.

use crate::error::{Error, Result};
use crate::linalg::{torus_displacement, torus_distance};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet { value, ..Jet::default() }
    }

    pub fn scale(self, s: f64) -> Self {
        Jet {
            value: self.value * s,
            grad: [self.grad[0] * s, self.grad[1] * s],
            hess: [
                [self.hess[0][0] * s, self.hess[0][1] * s],
                [self.hess[1][0] * s, self.hess[1][1] * s],
            ],
        }
    }

    pub fn product(self, o: Jet) -> Jet {
        let mut hess = [[0.0; 2]; 2];
        for (i, row) in hess.iter_mut().enumerate() {
            for (j, h) in row.iter_mut().enumerate() {
                *h = self.value * o.hess[i][j]
                    + o.value * self.hess[i][j]
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i];
            }
        }
        Jet {
            value: self.value * o.value,
            grad: [
                self.value * o.grad[0] + o.value * self.grad[0],
                self.value * o.grad[1] + o.value * self.grad[1],
            ],
            hess,
        }
    }
}

/// One term `cos·cos(k·x) + sin·sin(k·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub k: [i32; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl FourierTerm {
    fn jet(&self, x: [f64; 2]) -> Jet {
        let k = [self.k[0] as f64, self.k[1] as f64];
        let phase = k[0] * x[0] + k[1] * x[1];
        let (s, c) = phase.sin_cos();
        let value = self.cos * c + self.sin * s;
        let d = -self.cos * s + self.sin * c;
        Jet {
            value,
            grad: [d * k[0], d * k[1]],
            hess: [
                [-value * k[0] * k[0], -value * k[0] * k[1]],
                [-value * k[1] * k[0], -value * k[1] * k[1]],
            ],
        }
    }
}

/// Compactly supported C^∞ radial bump on the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Bump {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < PI) {
            return Err(Error::validation(
                "bump.radius",
                format!("radius {radius} must lie in (0, π) so the bump does not wrap"),
            ));
        }
        Ok(Bump { center, radius })
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        torus_distance(x, self.center) < self.radius
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        let d = torus_displacement(x, self.center);
        let r2 = self.radius * self.radius;
        let s = (d[0] * d[0] + d[1] * d[1]) / r2;
        if s >= 1.0 {
            return Jet::default();
        }
        let one_minus = 1.0 - s;
        let b = (1.0 - 1.0 / one_minus).exp();
        let b_s = -b / (one_minus * one_minus);
        let b_ss = b * (2.0 * s - 1.0) / one_minus.powi(4);
        let ds = [2.0 * d[0] / r2, 2.0 * d[1] / r2];
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = b_ss * ds[i] * ds[j] + if i == j { b_s * 2.0 / r2 } else { 0.0 };
            }
        }
        Jet {
            value: b,
            grad: [b_s * ds[0], b_s * ds[1]],
            hess,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    terms: Vec<FourierTerm>,
    bump: Option<Bump>,
}

impl ScalarField {
    pub fn zero() -> Self {
        ScalarField::default()
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return ScalarField::zero();
        }
        ScalarField {
            terms: vec![FourierTerm { k: [0, 0], cos: c, sin: 0.0 }],
            bump: None,
        }
    }

    pub fn fourier(terms: Vec<FourierTerm>) -> Self {
        let terms = terms
            .into_iter()
            .filter(|t| t.cos != 0.0 || (t.sin != 0.0 && t.k != [0, 0]))
            .collect();
        ScalarField { terms, bump: None }
    }

    pub fn with_bump(mut self, bump: Option<Bump>) -> Self {
        self.bump = bump;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        ScalarField {
            terms: self
                .terms
                .iter()
                .map(|t| FourierTerm { k: t.k, cos: t.cos * s, sin: t.sin * s })
                .collect(),
            bump: self.bump,
        }
    }

    pub fn terms(&self) -> &[FourierTerm] {
        &self.terms
    }

    pub fn bump(&self) -> Option<&Bump> {
        self.bump.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the field does not depend on x.
    pub fn is_constant(&self) -> bool {
        self.bump.is_none() && self.terms.iter().all(|t| t.k == [0, 0])
    }

    /// Mean over the torus (the k = 0 coefficient), ignoring any bump.
    pub fn mean_coefficient(&self) -> f64 {
        self.terms.iter().filter(|t| t.k == [0, 0]).map(|t| t.cos).sum()
    }

    fn series_jet(&self, x: [f64; 2]) -> Jet {
        let mut out = Jet::default();
        for t in &self.terms {
            let j = t.jet(x);
            out.value += j.value;
            for i in 0..2 {
                out.grad[i] += j.grad[i];
                for l in 0..2 {
                    out.hess[i][l] += j.hess[i][l];
                }
            }
        }
        out
    }

    pub fn jet(&self, x: [f64; 2]) -> Jet {
        match &self.bump {
            None => self.series_jet(x),
            Some(b) => {
                let bj = b.jet(x);
                if bj.value == 0.0 {
                    Jet::default()
                } else {
                    self.series_jet(x).product(bj)
                }
            }
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        let series: f64 = self
            .terms
            .iter()
            .map(|t| {
                let phase = t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1];
                t.cos * phase.cos() + t.sin * phase.sin()
            })
            .sum();
        match &self.bump {
            None => series,
            Some(b) => series * b.jet(x).value,
        }
    }

    /// Upper bound of |f| from the coefficient magnitudes (the bump is bounded by 1).
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.hypot(t.sin)).sum()
    }
}
