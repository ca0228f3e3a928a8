//! Independent reference computations used by several test targets.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Direct O(n^2) 2-D DFT with `exp(-2πi(kr/H + lc/W))`.
pub fn naive_dft(h: usize, w: usize, data: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for kr in 0..h {
        for kc in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let phase = -2.0 * PI * ((kr * r) as f64 / h as f64 + (kc * c) as f64 / w as f64);
                    acc += data[r * w + c] * Complex64::from_polar(1.0, phase);
                }
            }
            out[kr * w + kc] = acc;
        }
    }
    out
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `ln B(a, b)` from factorial-free products, valid for integer-or-half
/// parameters used in the fixtures; computed through Simpson on the full
/// interval instead so it shares nothing with the library.
pub fn beta_by_quadrature(a: f64, b: f64) -> f64 {
    simpson(|t| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0), 0.0, 1.0, 200_000)
}

/// Two-sided Wilcoxon p by listing all `2^n` sign assignments of the given
/// ranks.
pub fn wilcoxon_enumerated(ranks: &[f64], w_obs: f64) -> f64 {
    let n = ranks.len();
    let total: f64 = ranks.iter().sum();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let mut wp = 0.0;
        for (i, r) in ranks.iter().enumerate() {
            if mask >> i & 1 == 1 {
                wp += r;
            }
        }
        if wp.min(total - wp) <= w_obs + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

/// Ranks of absolute values with ties averaged, computed by counting.
pub fn ranks_by_counting(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let less = values.iter().filter(|u| *u < v).count() as f64;
            let equal = values.iter().filter(|u| *u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}
