//! Independent reference implementations shared by the integration tests.
//!
//! Written against the definitions only: plain loops, plain `f64`
//! accumulation, `powf` everywhere. No code from the library is reused.
#![allow(dead_code, clippy::too_many_arguments)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `(1/M) * sum_{i=i0}^{i1-M} |x[i+M]-x[i]|^p`, keeping increments with
/// `|d| <= c * sqrt(dt*M) * gamma`; `None` when `i1 - i0 < M`.
pub fn oracle_segment_variation(
    x: &[f64],
    i0: usize,
    i1: usize,
    p: f64,
    m: usize,
    gamma: f64,
    dt: f64,
    c: f64,
) -> Option<f64> {
    if i1 < i0 + m {
        return None;
    }
    let limit = c * (dt * m as f64).sqrt() * gamma;
    let mut total = 0.0;
    for i in i0..=i1 - m {
        let d = (x[i + m] - x[i]).abs();
        if gamma.is_infinite() || d <= limit {
            total += d.powf(p);
        }
    }
    Some(total / m as f64)
}

/// Non-overlapping variation from `s0` with block length `M` up to `t1`.
pub fn oracle_bhat(x: &[f64], s0: usize, t1: usize, p: f64, m: usize) -> f64 {
    let blocks = (t1 - s0) / m;
    let mut total = 0.0;
    for k in 1..=blocks {
        let mut d = 0.0;
        // block increment as an explicit inner loop over its endpoints
        for (sign, idx) in [(1.0, s0 + k * m), (-1.0, s0 + (k - 1) * m)] {
            d += sign * x[idx];
        }
        total += f64::abs(d).powf(p);
    }
    total
}

/// Kept samples by direct window test, then runs of at least two samples.
pub fn oracle_segments(n: usize, dt: f64, t0: f64, spikes: &[f64], pre: f64, post: f64) -> Vec<(usize, usize)> {
    let slack = 1e-9 * dt;
    let kept: Vec<bool> = (0..n)
        .map(|i| {
            let t = t0 + i as f64 * dt;
            !spikes.iter().any(|&tau| t > tau - pre + slack && t < tau + post - slack)
        })
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if kept[i] {
            let start = i;
            while i + 1 < n && kept[i + 1] {
                i += 1;
            }
            if i > start {
                out.push((start, i));
            }
        }
        i += 1;
    }
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Gaussian random walk with occasional large steps and flat stretches.
pub fn random_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut x = rng.random_range(-70.0..-50.0);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(x);
        let kind: f64 = rng.random();
        let z: f64 = StandardNormal.sample(rng);
        x += if kind < 0.05 {
            20.0 * z
        } else if kind < 0.1 {
            0.0
        } else {
            z * 0.3
        };
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
