//! Reproducible per-path random streams.
//!
//! Every path owns an independent ChaCha8 stream selected by `(seed, path)`,
//! so the numbers a path sees never depend on how paths are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::special::inv_norm_cdf;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Normal variates for a single path.
#[derive(Clone, Debug)]
pub struct PathRng {
    inner: ChaCha8Rng,
}

impl PathRng {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(path);
        PathRng { inner }
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * TWO_POW_M53
    }

    /// Standard normal by inversion.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        inv_norm_cdf(self.uniform())
    }
}
