//! Deterministic seeded PRNG.
//!
//! The generator is SplitMix64: 64 bits of state, advanced by a fixed odd
//! increment and finalized with two xor-shift multiplies. It is small,
//! statistically adequate for initialization and sampling, and trivially
//! reproducible. Sub-streams are derived with [`derive`] so independent
//! consumers (per-sample generation, per-network init) never share a
//! sequence.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from `(seed, stream)`.
///
/// Implemented as one SplitMix64 step applied to `seed ^ (stream + 1) * GOLDEN`,
/// so distinct streams land in unrelated parts of the state space.
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut s = seed ^ stream.wrapping_add(1).wrapping_mul(GOLDEN);
    splitmix64(&mut s)
}

/// SplitMix64 random number generator.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of mantissa.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller. Consumes exactly two draws per call
    /// (no caching) so the stream is position-independent.
    pub fn normal(&mut self) -> f64 {
        let u1 = (self.uniform()).max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Samples an index with probability proportional to `weights`.
    pub fn weighted_index(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut r = self.uniform() * total;
        for (i, w) in weights.iter().enumerate() {
            r -= w;
            if r < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}
