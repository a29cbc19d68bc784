#![allow(dead_code)]

use std::f64::consts::PI;

use fcofdm::fcfb::{Scheme, SubbandFilter};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Max abs difference relative to the largest magnitude of `b`.
pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    d / max_abs(b).max(f64::MIN_POSITIVE)
}

pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Synthesis matrix of a whole bank written out from its definition:
/// time window, unitary length-L DFT, centering shift, frequency window,
/// bin placement with the continuity rotation, unitary length-N inverse
/// DFT scaled by sqrt(N/L), output time window. Row-major, rows are
/// padded high-rate samples, columns padded low-rate samples.
pub fn oracle_matrix(f: &SubbandFilter) -> (usize, usize, Vec<Complex64>) {
    let (n, l, i) = (f.cfg.n_long, f.cfg.l_short, f.cfg.interp);
    let s = &f.schedule;
    let cols = s.padded_len();
    let rows = i * cols;
    let mut m = vec![Complex64::new(0.0, 0.0); rows * cols];
    let w_l: Vec<Complex64> = (0..l).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / l as f64)).collect();
    let w_n: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
    let scale = 1.0 / (l as f64).sqrt() / (n as f64).sqrt() * (n as f64 / l as f64).sqrt();
    for (r, b) in s.blocks.iter().enumerate() {
        let c = f.offsets[r];
        let d = &f.windows[r].d;
        // Phase of the offset carrier at the block's first output sample,
        // counted from the first data sample.
        let t0 = b.q as i64 - (i * s.l_l0) as i64;
        let rot = Complex64::from_polar(1.0, 2.0 * PI * ((c * t0).rem_euclid(n as i64)) as f64 / n as f64);
        let a = |t: usize| match b.scheme {
            Scheme::Ola if t < b.l_l || t >= b.l_l + b.l_s => 0.0,
            _ => 1.0,
        };
        let sw = |j: usize| match b.scheme {
            Scheme::Ols if j < i * b.l_l || j >= i * (b.l_l + b.l_s) => 0.0,
            _ => 1.0,
        };
        for t in 0..l {
            if a(t) == 0.0 {
                continue;
            }
            // Spectrum of a unit impulse at t after shift and window.
            let bins: Vec<(usize, Complex64)> = (0..l)
                .filter(|&j| d[j].norm_sqr() != 0.0)
                .map(|j| {
                    let k = (j + l / 2) % l;
                    let dst = (c - (l / 2) as i64 + j as i64).rem_euclid(n as i64) as usize;
                    (dst, w_l[(k * t) % l] * d[j] * rot)
                })
                .collect();
            for jn in 0..n {
                if sw(jn) == 0.0 {
                    continue;
                }
                let v: Complex64 = bins.iter().map(|&(dst, x)| x * w_n[(dst * jn) % n]).sum();
                m[(b.q + jn) * cols + b.p + t] += v * scale;
            }
        }
    }
    (rows, cols, m)
}

pub fn mat_vec(rows: usize, cols: usize, m: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    (0..rows).map(|r| m[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}
