//! Counter-based random streams.
//!
//! A stream is ChaCha8 keyed by `(seed, domain)` with the stream id written
//! into ChaCha's 64-bit stream word. Two streams with the same key produce the
//! same sequence on every platform; different stream ids are independent, so
//! element `i` of a batch can be processed on any worker.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags separating the purposes a `(seed, stream)` pair is used for.
pub mod domain {
    /// Per-example augmentation draws.
    pub const ELEMENT: u64 = 0;
    /// Partner permutation of a batch.
    pub const PAIRING: u64 = 1;
    /// Apply-probability coin flips.
    pub const APPLY: u64 = 2;
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    domain: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::with_domain(seed, domain::ELEMENT, stream)
    }

    pub fn with_domain(seed: u64, domain: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        Self {
            seed,
            domain,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Unbiased uniform integer in `0..n`. Returns 0 when `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        if n <= 1 {
            return 0;
        }
        // Lemire's multiply-shift with rejection.
        let threshold = n.wrapping_neg() % n;
        loop {
            let wide = (self.inner.next_u64() as u128) * (n as u128);
            if (wide as u64) >= threshold {
                return (wide >> 64) as u64;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
