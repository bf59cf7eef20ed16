//! Numerical laboratory for perturbed propagated eigenfunctions on the flat 2-torus.
//!
//! The crate realizes `φ^{(u)}_{h,t} = exp(−i t P_u(h) / h) φ_h` for metric deformations
//! `g_u` of the flat torus, estimates the moments of `Re φ^{(u)}_{h,t}(x)` over the
//! deformation parameters `u`, and evaluates the classical prediction for the limiting
//! variance from Hamiltonian-flow data.
//!
//! Module map:
//! - [`metric`], [`admissibility`]: metric families, symbols, admissibility certificates.
//! - [`classical`]: Hamiltonian flow with monodromy, the `u'` solve, shell quadrature.
//! - [`quantum`]: pseudospectral operator, Krylov propagation, Loschmidt echo.
//! - [`moments`]: the deformation measure and moment estimation.
//! - [`theory`]: the variance integrand and its quadrature.
//! - [`config`], [`manifest`], [`cli`]: configuration files and the command-line front end.

// negated float comparisons are deliberate: they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admissibility;
pub mod classical;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod linalg;
pub mod lowdisc;
pub mod manifest;
pub mod metric;
pub mod moments;
pub mod presets;
pub mod quantum;
pub mod theory;

pub use error::{Error, Result};
pub use metric::MetricFamily;
