//! Random number sources.
//!
//! Two kinds are used deliberately:
//!
//! - [`CounterRng`]: a keyed, stateless generator. Every draw is a pure
//!   function of `(seed, step, index)`, so a sampling trajectory produces
//!   the same noise no matter how work is batched or parallelized.
//! - Seeded ChaCha streams (via `rand_chacha`) for training-time draws,
//!   where one owner consumes an ordered stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64-bit finalizer (splitmix64 style); full avalanche.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^ (z >> 33)
}

/// Keyed counter-based generator. Not a stream: each `(step, index)` cell
/// is an independent read.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn cell(&self, step: u64, index: u64) -> u64 {
        let mut h = mix(self.seed.wrapping_add(GOLDEN));
        h = mix(h ^ step.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        h = mix(h ^ index.wrapping_mul(0x94d0_49bb_1331_11eb));
        h
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform(&self, step: u64, index: u64) -> f64 {
        let h = self.cell(step, index);
        (((h >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw via Box-Muller on two keyed uniforms.
    pub fn gauss(&self, step: u64, index: u64) -> f64 {
        let u1 = self.uniform(step, index);
        let h2 = mix(self.cell(step, index).wrapping_add(GOLDEN));
        let u2 = (((h2 >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fill a buffer with standard normal draws for one step.
    pub fn gauss_fill(&self, step: u64, out: &mut [f64]) {
        for (i, v) in out.iter_mut().enumerate() {
            *v = self.gauss(step, i as u64);
        }
    }
}

/// Ordered stream for training: data order, noise, and time draws all come
/// from one seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fold a salt into a seed; used to give each dataset item its own noise
/// key while everything still derives from one run seed.
pub fn derive(seed: u64, salt: u64) -> u64 {
    mix(seed ^ mix(salt.wrapping_add(GOLDEN)))
}
