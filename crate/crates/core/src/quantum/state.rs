//! Grid wave functions, flat eigenfunctions, interpolation and binary snapshots.

use super::operator::grid_point;
use super::spectral::{frequency, Spectral};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

/// How the stored amplitudes relate to the wave function `f`.
#[derive(Clone, Debug, PartialEq)]
pub enum Gauge {
    /// Amplitudes are `f` itself; norms use `dx`.
    Reference,
    /// Amplitudes are `ρ^{1/2} f` with the stored `ρ^{1/2}`; norms are `g_u`-volume norms.
    Weighted(Arc<Vec<f64>>),
}

impl Gauge {
    pub fn name(&self) -> &'static str {
        match self {
            Gauge::Reference => "reference",
            Gauge::Weighted(_) => "weighted",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub n: usize,
    pub h: f64,
    pub gauge: Gauge,
    pub data: Vec<Complex64>,
}

/// Smallest power of two that is at least `8·max|mᵢ| + 16`.
pub fn default_resolution(m: [i64; 2]) -> usize {
    let need = 8 * m[0].unsigned_abs().max(m[1].unsigned_abs()) as usize + 16;
    need.next_power_of_two()
}

/// Require `n ≥ factor · max(|m|, √E / h)`.
pub fn check_resolution(n: usize, m: [i64; 2], energy: f64, h: f64, factor: f64) -> Result<()> {
    let mnorm = (m[0] as f64).hypot(m[1] as f64);
    let scale = mnorm.max(energy.max(0.0).sqrt() / h);
    let required = (factor * scale).ceil() as usize;
    if n < required {
        return Err(Error::UnresolvedGrid { n, required });
    }
    Ok(())
}

/// `φ_h = (2π)^{−1} e^{i⟨m, x⟩}` and its eigenvalue `h²|m|² + V₀`.
pub fn flat_eigenfunction(m: [i64; 2], h: f64, n: usize, v0: f64) -> (WaveState, f64) {
    let data = (0..n * n)
        .map(|idx| {
            let x = grid_point(idx, n);
            Complex64::from_polar(1.0 / TAU, m[0] as f64 * x[0] + m[1] as f64 * x[1])
        })
        .collect();
    let e = h * h * (m[0] * m[0] + m[1] * m[1]) as f64 + v0;
    (WaveState { n, h, gauge: Gauge::Reference, data }, e)
}

/// Real cardinal weights of trigonometric interpolation at `x` (Nyquist mode as a cosine).
fn cardinal_weights(n: usize, x: f64) -> Vec<f64> {
    let half = n / 2;
    (0..n)
        .map(|j| {
            let d = x - TAU * j as f64 / n as f64;
            let mut s = 1.0;
            for k in 1..half {
                s += 2.0 * (k as f64 * d).cos();
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += (half as f64 * x).cos() * sign;
            s / n as f64
        })
        .collect()
}

/// Interpolation weights for one evaluation point; reusable across states on the same grid.
#[derive(Clone, Debug)]
pub struct Interpolator {
    n: usize,
    w1: Vec<f64>,
    w2: Vec<f64>,
}

impl Interpolator {
    pub fn new(n: usize, x: [f64; 2]) -> Self {
        Interpolator { n, w1: cardinal_weights(n, x[0]), w2: cardinal_weights(n, x[1]) }
    }

    /// Value of the physical wave function at the point.
    pub fn evaluate(&self, state: &WaveState) -> Complex64 {
        assert_eq!(state.n, self.n, "interpolator built for another grid");
        let n = self.n;
        let mut total = Complex64::default();
        for i in 0..n {
            if self.w1[i] == 0.0 {
                continue;
            }
            let row = &state.data[i * n..(i + 1) * n];
            let mut acc = Complex64::default();
            match &state.gauge {
                Gauge::Reference => {
                    for j in 0..n {
                        acc += row[j] * self.w2[j];
                    }
                }
                Gauge::Weighted(w) => {
                    let wr = &w[i * n..(i + 1) * n];
                    for j in 0..n {
                        acc += row[j] * (self.w2[j] / wr[j]);
                    }
                }
            }
            total += acc * self.w1[i];
        }
        total
    }
}

pub fn evaluate(state: &WaveState, x: [f64; 2]) -> Complex64 {
    Interpolator::new(state.n, x).evaluate(state)
}

impl WaveState {
    pub fn cell_area(&self) -> f64 {
        let d = TAU / self.n as f64;
        d * d
    }

    /// L² norm under the declared measure.
    pub fn norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_area()).sqrt()
    }

    /// Physical amplitudes `f` on the grid.
    pub fn reference_values(&self) -> Vec<Complex64> {
        match &self.gauge {
            Gauge::Reference => self.data.clone(),
            Gauge::Weighted(w) => self.data.iter().zip(w.iter()).map(|(z, s)| z / s).collect(),
        }
    }

    pub fn to_reference(&self) -> WaveState {
        WaveState { n: self.n, h: self.h, gauge: Gauge::Reference, data: self.reference_values() }
    }

    /// Re-express in the weighted gauge with the given `ρ^{1/2}`.
    pub fn to_weighted(&self, sqrt_rho: &Arc<Vec<f64>>) -> WaveState {
        if let Gauge::Weighted(w) = &self.gauge {
            if Arc::ptr_eq(w, sqrt_rho) || w == sqrt_rho {
                return self.clone();
            }
        }
        let f = self.reference_values();
        let data = f.iter().zip(sqrt_rho.iter()).map(|(z, s)| z * s).collect();
        WaveState { n: self.n, h: self.h, gauge: Gauge::Weighted(sqrt_rho.clone()), data }
    }

    /// `⟨self, other⟩ = ∫ conj(f) g dx` of the physical amplitudes.
    pub fn inner_reference(&self, other: &WaveState) -> Complex64 {
        assert_eq!(self.n, other.n);
        let a = self.reference_values();
        let b = other.reference_values();
        a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * self.cell_area()
    }

    pub fn reference_norm(&self) -> f64 {
        self.inner_reference(self).re.sqrt()
    }

    /// Fraction of `dx`-mass with `h²|k|²` outside `(lo, hi)`.
    pub fn band_leakage(&self, lo: f64, hi: f64) -> f64 {
        let n = self.n;
        let sp = Spectral::new(n);
        let mut ws = sp.workspace();
        let mut f = self.reference_values();
        sp.forward(&mut f, &mut ws.fft_scratch);
        let mut inside = 0.0;
        let mut total = 0.0;
        for (idx, z) in f.iter().enumerate() {
            let k1 = frequency(idx / n, n) as f64;
            let k2 = frequency(idx % n, n) as f64;
            let e = self.h * self.h * (k1 * k1 + k2 * k2);
            let w = z.norm_sqr();
            total += w;
            if e > lo && e < hi {
                inside += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            (total - inside) / total
        }
    }
}

const MAGIC: &[u8; 8] = b"ECHOWAVE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub h: f64,
    pub gauge: String,
    pub family_hash: String,
    #[serde(default)]
    pub manifest_hash: String,
}

/// Binary snapshot: magic, little-endian u64 header length, JSON header, then the amplitudes
/// as little-endian (re, im) pairs, followed by `ρ^{1/2}` for the weighted gauge.
pub fn write_snapshot<W: Write>(state: &WaveState, family_hash: &str, manifest_hash: &str, mut out: W) -> Result<()> {
    let header = SnapshotHeader {
        n: state.n,
        h: state.h,
        gauge: state.gauge.name().into(),
        family_hash: family_hash.into(),
        manifest_hash: manifest_hash.into(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(state.data.len() * 16);
    for z in &state.data {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    if let Gauge::Weighted(w) = &state.gauge {
        for v in w.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<(SnapshotHeader, WaveState)> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::validation("snapshot", "not a wave-state snapshot"));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: SnapshotHeader = serde_json::from_slice(&json)?;
    let nn = header.n * header.n;
    let mut f64s = |count: usize| -> Result<Vec<f64>> {
        let mut raw = vec![0u8; count * 8];
        input.read_exact(&mut raw)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let flat = f64s(2 * nn)?;
    let data = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let gauge = match header.gauge.as_str() {
        "reference" => Gauge::Reference,
        "weighted" => Gauge::Weighted(Arc::new(f64s(nn)?)),
        other => return Err(Error::validation("snapshot.gauge", format!("unknown gauge {other}"))),
    };
    let state = WaveState { n: header.n, h: header.h, gauge, data };
    Ok((header, state))
}

pub fn save_snapshot(state: &WaveState, family_hash: &str, manifest_hash: &str, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot(state, family_hash, manifest_hash, file)
}

pub fn load_snapshot(path: &Path) -> Result<(SnapshotHeader, WaveState)> {
    read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// `(2π)^{−1}` expressed for readability in tests and reports.
pub const FLAT_AMPLITUDE: f64 = 0.5 / PI;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_and_norm() {
        let (s, e) = flat_eigenfunction([3, 4], 0.2, 16, 0.0);
        assert!((e - 1.0).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-14);
        let (s, e) = flat_eigenfunction([1, 0], 1.0, 4, 0.0);
        assert_eq!(e, 1.0);
        assert!((s.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_is_exact() {
        let (s, _) = flat_eigenfunction([3, 4], 0.2, 32, 0.0);
        assert!((evaluate(&s, [0.0, 0.0]) - Complex64::new(FLAT_AMPLITUDE, 0.0)).norm() < 1e-14);
        let x = [1.234, 5.678];
        let exact = Complex64::from_polar(FLAT_AMPLITUDE, 3.0 * x[0] + 4.0 * x[1]);
        assert!((evaluate(&s, x) - exact).norm() < 1e-13);
        let g = grid_point(5 * 32 + 7, 32);
        assert!((evaluate(&s, g) - s.data[5 * 32 + 7]).norm() < 1e-14);
    }

    #[test]
    fn nyquist_mode_interpolates_as_cosine() {
        let n = 8;
        let data: Vec<Complex64> = (0..n * n)
            .map(|idx| Complex64::new((4.0 * grid_point(idx, n)[0]).cos(), 0.0))
            .collect();
        let s = WaveState { n, h: 1.0, gauge: Gauge::Reference, data };
        let x = [0.3, 0.1];
        assert!((evaluate(&s, x).re - (4.0 * 0.3f64).cos()).abs() < 1e-13);
    }

    #[test]
    fn snapshot_roundtrip() {
        let (s, _) = flat_eigenfunction([1, 2], 0.5, 8, 0.0);
        let w = Arc::new((0..64).map(|i| 1.0 + 0.01 * i as f64).collect::<Vec<_>>());
        let ws = s.to_weighted(&w);
        let mut buf = Vec::new();
        write_snapshot(&ws, "abc", "def", &mut buf).unwrap();
        let (h, back) = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(h.family_hash, "abc");
        assert_eq!(back, ws);
    }

    #[test]
    fn resolution_rule() {
        assert_eq!(default_resolution([3, 4]), 64);
        assert_eq!(default_resolution([7, 24]), 256);
        assert!(check_resolution(16, [3, 4], 1.0, 0.2, 4.0).is_err());
        assert!(check_resolution(64, [3, 4], 1.0, 0.2, 4.0).is_ok());
    }
}
