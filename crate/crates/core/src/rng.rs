//! Reproducible random streams.
//!
//! Every stochastic step in the crate draws from a [`SimRng`], a PCG32
//! (XSH-RR, 64-bit state) generator. A stream is fully determined by a
//! 64-bit seed plus a purpose tag and an index, so per-case streams can be
//! derived without sharing a generator between threads:
//!
//! ```text
//! state  = splitmix64(seed ^ splitmix64(purpose) ^ splitmix64(index + 1))
//! stream = 0x0a02_bdbf_7bb3_c0a7 ^ (purpose << 32) ^ index
//! ```
//!
//! All the samplers below are written in terms of `next_u32`/`next_u64` so
//! the sequences do not depend on any external distribution code.

use rand_core::Rng as _;
use rand_pcg::Pcg32;

/// Default PCG stream selector (1442695040888963407 >> 1).
pub const DEFAULT_STREAM: u64 = 0x0a02_bdbf_7bb3_c0a7;

/// Purpose tags for stream derivation. Each stochastic stage uses its own
/// tag so that, e.g., adding augmentation never perturbs phantom geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Phantom = 1,
    Category = 2,
    Split = 3,
    Trajectory = 4,
    Augment = 5,
    Ordering = 6,
    Init = 7,
    Fixture = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: Pcg32,
}

impl SimRng {
    /// Generator on the default stream.
    pub fn new(seed: u64) -> Self {
        SimRng {
            inner: Pcg32::new(seed, DEFAULT_STREAM),
        }
    }

    /// Independent stream for `(seed, purpose, index)`.
    pub fn derive(seed: u64, purpose: Purpose, index: u64) -> Self {
        let tag = purpose as u64;
        let state = splitmix64(seed ^ splitmix64(tag) ^ splitmix64(index.wrapping_add(1)));
        let stream = DEFAULT_STREAM ^ (tag << 32) ^ index;
        SimRng {
            inner: Pcg32::new(state, stream),
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]` (continuous; the closed upper end is measure zero).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`, unbiased by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Uniform integer in `[lo, hi)`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        assert!(hi > lo, "empty range {lo}..{hi}");
        lo + self.below((hi - lo) as u64) as usize
    }

    /// Standard normal via Box-Muller (one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Bernoulli draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
