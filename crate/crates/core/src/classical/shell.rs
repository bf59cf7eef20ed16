//! Quadrature for the Liouville measure on the energy shell `p₀⁻¹(E)`.
//!
//! With `A(y) = g₀⁻¹(y)` the shell fibre over `y` is the ellipse `ηᵀAη = E − V(y)`,
//! parametrized as `η = r(y) A^{−1/2} ω(θ)`. The co-area density `dy dη δ(p₀ − E)` then
//! becomes `det(A)^{−1/2} / 2 · dy dθ`.

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::metric::MetricFamily;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellNode {
    pub y: [f64; 2],
    pub eta: [f64; 2],
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellQuadrature {
    pub energy: f64,
    pub n_y: usize,
    pub n_theta: usize,
    pub nodes: Vec<ShellNode>,
    pub total_mass: f64,
}

/// Default distance kept from the turning set, as a fraction of E.
pub const DEFAULT_MARGIN_FRACTION: f64 = 0.1;

pub fn shell_quadrature(family: &MetricFamily, energy: f64, n_y: usize, n_theta: usize, margin: f64) -> Result<ShellQuadrature> {
    if n_y == 0 || n_theta == 0 {
        return Err(Error::validation("shell.resolution", "resolution must be positive"));
    }
    if !(energy > 0.0) {
        return Err(Error::validation("physics.energy", format!("energy must be positive, got {energy}")));
    }
    let dy = TAU / n_y as f64;
    let dth = TAU / n_theta as f64;
    let mut nodes = Vec::with_capacity(n_y * n_y * n_theta);
    for i in 0..n_y {
        for j in 0..n_y {
            let y = [i as f64 * dy, j as f64 * dy];
            let gap = energy - family.potential().value(y);
            if gap <= margin {
                return Err(Error::Caustic { y, gap, margin });
            }
            let a = family.g0_inv().value(y);
            let inv_sqrt = a
                .sqrt_spd()
                .inverse()
                .ok_or_else(|| Error::Numerical(format!("degenerate reference metric at {y:?}")))?;
            let r = gap.sqrt();
            let w = 0.5 / a.det().sqrt() * dy * dy * dth;
            for l in 0..n_theta {
                let th = l as f64 * dth;
                let e = inv_sqrt.mul_vec([th.cos(), th.sin()]);
                nodes.push(ShellNode { y, eta: [r * e[0], r * e[1]], weight: w });
            }
        }
    }
    let weights: Vec<f64> = nodes.iter().map(|n| n.weight).collect();
    let total_mass = pairwise_sum(&weights);
    Ok(ShellQuadrature { energy, n_y, n_theta, nodes, total_mass })
}

impl ShellQuadrature {
    /// Normalized average `∫ f dω_E / |p₀⁻¹(E)|`.
    pub fn average<F: Fn(&ShellNode) -> f64>(&self, f: F) -> f64 {
        let v: Vec<f64> = self.nodes.iter().map(|n| n.weight * f(n)).collect();
        pairwise_sum(&v) / self.total_mass
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// File name for a cached quadrature keyed by energy, resolution and family hash.
    pub fn cache_name(energy: f64, n_y: usize, n_theta: usize, family_hash: &str) -> String {
        format!("shell-{:016x}-{n_y}x{n_theta}-{}.json", energy.to_bits(), &family_hash[..family_hash.len().min(16)])
    }
}

/// Load a cached quadrature from `dir` or build and store it.
pub fn cached_shell_quadrature(
    dir: &Path,
    family_hash: &str,
    family: &MetricFamily,
    energy: f64,
    n_y: usize,
    n_theta: usize,
    margin: f64,
) -> Result<ShellQuadrature> {
    let path = dir.join(ShellQuadrature::cache_name(energy, n_y, n_theta, family_hash));
    if let Ok(q) = ShellQuadrature::load(&path) {
        return Ok(q);
    }
    let q = shell_quadrature(family, energy, n_y, n_theta, margin)?;
    std::fs::create_dir_all(dir)?;
    q.save(&path)?;
    Ok(q)
}
