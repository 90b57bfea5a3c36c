//! Deterministic, platform-stable randomness.
//!
//! Every random draw in the crate flows through [`DetRng`], a ChaCha8 stream
//! cipher keyed by a `(seed, stream_id)` pair. Identical pairs produce
//! identical sequences on every platform, and distinct stream ids give
//! independent streams for the same seed, so per-client and per-round work
//! can be keyed without coordination.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic random stream keyed by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct DetRng {
    pub seed: u64,
    pub stream_id: u64,
    inner: ChaCha8Rng,
}

impl DetRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in [0, 1) with 53 random bits.
    pub fn f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1]; safe as a logarithm argument.
    fn f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, bound) via widening multiply.
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "bound must be positive");
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.f64_open();
        let u2 = self.f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Gamma(shape, 1) draw by Marsaglia-Tsang squeeze.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "shape must be positive");
        if shape < 1.0 {
            // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
            let boost = self.f64_open().powf(1.0 / shape);
            return self.gamma(shape + 1.0) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.f64_open();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Symmetric Dirichlet draw with concentration `alpha` over `n` parts.
    pub fn dirichlet(&mut self, alpha: f64, n: usize) -> Vec<f64> {
        assert!(n > 0 && alpha > 0.0);
        let mut draws: Vec<f64> = (0..n).map(|_| self.gamma(alpha)).collect();
        let total: f64 = draws.iter().sum();
        if total <= 0.0 {
            // All gammas underflowed; fall back to uniform proportions.
            return vec![1.0 / n as f64; n];
        }
        for d in &mut draws {
            *d /= total;
        }
        draws
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// One keyed uniform draw in [0, 1) for `(seed, a, b)`; order-independent
/// replacement for sequential sampling in per-round, per-client decisions.
pub fn keyed_f64(seed: u64, a: u64, b: u64) -> f64 {
    let mut rng = DetRng::new(seed, (a << 32) | (b & 0xffff_ffff));
    rng.f64()
}
