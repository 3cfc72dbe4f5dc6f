//! Seeded random source shared by every generator in the crate.
//!
//! The bit stream is xoshiro256** seeded through SplitMix64 (the reference
//! `seed_from_u64` expansion). Derived quantities use fixed, documented
//! transforms so that other implementations can reproduce datasets exactly:
//!
//! * `uniform()`: `(next_u64() >> 11) * 2^-53`, a value in `[0, 1)`.
//! * `normal()`: Box-Muller on two uniforms, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`;
//!   one normal per call, the sine branch is discarded.
//! * `below(n)`: rejection sampling on `next_u64()` against the largest
//!   multiple of `n` that fits in 2^64, then `x % n`.
//! * `shuffle`: Fisher-Yates from the last index down, `j = below(i + 1)`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

/// Stream tags keep independent consumers (data, init, sampling) from sharing
/// a sequence even when they are given the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data = 1,
    Init = 2,
    Proxies = 3,
    Sampler = 4,
    Cluster = 5,
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256StarStar,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Generator for `stream`, derived from `seed` by mixing in the tag.
    pub fn for_stream(seed: u64, stream: Stream) -> Self {
        let tag = (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        Self::new(seed ^ tag)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `count` distinct indices from `0..n`, in draw order.
    pub fn sample_distinct(&mut self, n: usize, count: usize) -> Vec<usize> {
        assert!(count <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool
    }
}
