//! Log-log decay fits of odd moments across a list of semiclassical parameters.

use super::estimate::{estimate_moments, MomentBudget, MomentReport};
use super::measure::DeformationMeasure;
use crate::error::{Error, Result};
use crate::metric::MetricFamily;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub p: u32,
    /// Fitted exponent of `|moment_p| ~ h^slope`.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub reports: Vec<MomentReport>,
    pub fits: Vec<SlopeFit>,
    /// max / min of the variance across the h list.
    pub variance_ratio: f64,
}

impl DecayTable {
    pub fn fit(&self, p: u32) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.p == p)
    }
}

/// Least-squares line through `(xs, ys)`: returns (slope, intercept, residuals).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    (slope, intercept, residuals)
}

/// Integer vectors `m` paired with `h = √E / |m|`, so that `h²|m|² = E` exactly in exact arithmetic.
pub fn lattice_h(energy: f64, m: [i64; 2]) -> f64 {
    energy.sqrt() / ((m[0] * m[0] + m[1] * m[1]) as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
pub fn decay_study(
    family: &MetricFamily,
    measure: &DeformationMeasure,
    x: [f64; 2],
    t: f64,
    energy: f64,
    lattice: &[[i64; 2]],
    p_list: &[u32],
    budget: &MomentBudget,
    seed: u64,
) -> Result<DecayTable> {
    if lattice.len() < 3 {
        return Err(Error::InsufficientData(format!("decay fit needs at least 3 h values, got {}", lattice.len())));
    }
    if let Some(p) = p_list.iter().find(|p| *p % 2 == 0) {
        return Err(Error::validation("decay.p", format!("only odd moments are fitted, got p = {p}")));
    }
    let p_max = p_list.iter().copied().max().unwrap_or(1);
    let mut reports = Vec::with_capacity(lattice.len());
    for m in lattice {
        let h = lattice_h(energy, *m);
        reports.push(estimate_moments(family, measure, x, t, h, *m, p_max, budget, seed)?);
    }
    let log_h: Vec<f64> = reports.iter().map(|r| r.h.ln()).collect();
    let fits = p_list
        .iter()
        .map(|&p| {
            let ys: Vec<f64> = reports
                .iter()
                .map(|r| r.moment(p).map_or(f64::NAN, |m| m.value.abs().max(f64::MIN_POSITIVE).ln()))
                .collect();
            let (slope, intercept, residuals) = fit_line(&log_h, &ys);
            SlopeFit { p, slope, intercept, residuals }
        })
        .collect();
    let vars: Vec<f64> = reports.iter().map(|r| r.variance.value).collect();
    let vmax = vars.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = vars.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DecayTable { reports, fits, variance_ratio: vmax / vmin })
}
