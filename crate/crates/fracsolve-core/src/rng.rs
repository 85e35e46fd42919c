//! Deterministic counter-based pseudo-random generator.
//!
//! The generator is SplitMix64 in counter mode: the value at index `i` of a
//! stream is `mix64(base + i * GAMMA)`, where `base` is derived from the user
//! seed and a stream identifier. Every generated dataset draws from its own
//! stream so arrays can be produced in any order (or in parallel) and still be
//! bit-identical for a given seed. Integer and uniform output is exact and
//! platform independent; Gaussian output goes through `ln`/`cos` and is
//! reproducible on a given platform.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One independent stream of a seeded generator.
#[derive(Debug, Clone)]
pub struct Rng {
    base: u64,
    counter: u64,
    gauss_cache: Option<f64>,
}

impl Rng {
    /// Stream `stream` of the generator seeded with `seed`.
    pub fn new(seed: u64, stream: u64) -> Self {
        let base = mix64(seed ^ mix64(stream.wrapping_mul(GAMMA) ^ 0x5851_F42D_4C95_7F2D));
        Rng {
            base,
            counter: 0,
            gauss_cache: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = mix64(self.base.wrapping_add(self.counter.wrapping_mul(GAMMA)));
        self.counter += 1;
        v
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw from `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer from `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw (Box-Muller; consumes two uniforms per pair).
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.gauss_cache.take() {
            return z;
        }
        // 1 - uniform() lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.gauss_cache = Some(r * s);
        r * c
    }

    /// Fill a vector with uniform draws from `[lo, hi)`.
    pub fn uniform_vec(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform_in(lo, hi)).collect()
    }

    /// Fill a vector with standard normal draws.
    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }
}
