//! Halton points and Cranley–Patterson shifts for deterministic sampling.

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    out
}

/// Coordinate `dim` of the Halton point with the given index (index 0 is skipped).
pub fn halton(index: u64, dim: usize) -> f64 {
    radical_inverse(index + 1, PRIMES[dim % PRIMES.len()])
}

pub fn halton_point(index: u64, dims: usize) -> Vec<f64> {
    (0..dims).map(|d| halton(index, d)).collect()
}

/// Halton point shifted modulo 1 by `shift`.
pub fn shifted_halton_point(index: u64, shift: &[f64]) -> Vec<f64> {
    shift
        .iter()
        .enumerate()
        .map(|(d, s)| (halton(index, d) + s).fract())
        .collect()
}
