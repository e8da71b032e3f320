//! Counter-based, splittable uniform generator.
//!
//! Output word `i` of stream `(seed, stream_id)` is a pure function of the
//! triple `(seed, stream_id, i)`:
//!
//! ```text
//! k0  = mix(seed + GOLDEN)
//! k1  = mix(stream_id ^ STREAM_SALT)
//! out = mix(mix(i * GOLDEN ^ k0) + k1)
//! ```
//!
//! where `mix` is the 64-bit SplitMix finalizer and all arithmetic wraps.
//! Any word can be computed without generating the words before it, so
//! streams can be split across threads and replayed from any position.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const STREAM_SALT: u64 = 0x6a09_e667_f3bc_c909;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The raw 64-bit block for one counter value.
#[inline]
pub fn block(seed: u64, stream_id: u64, counter: u64) -> u64 {
    let k0 = mix64(seed.wrapping_add(GOLDEN));
    let k1 = mix64(stream_id ^ STREAM_SALT);
    mix64(mix64(counter.wrapping_mul(GOLDEN) ^ k0).wrapping_add(k1))
}

/// Anything that yields uniforms in `[0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;

    /// Uniform in `(0, 1]`, safe as a logarithm argument.
    fn next_open_uniform(&mut self) -> f64 {
        1.0 - self.next_uniform()
    }
}

/// A positioned stream `(seed, stream_id, counter)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterRng {
    seed: u64,
    stream_id: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        CounterRng {
            seed,
            stream_id,
            counter: 0,
        }
    }

    /// A sibling stream sharing this seed.
    pub fn split(&self, stream_id: u64) -> Self {
        CounterRng::new(self.seed, stream_id)
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn seek(&mut self, counter: u64) {
        self.counter = counter;
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = block(self.seed, self.stream_id, self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }
}

impl UniformSource for CounterRng {
    /// Top 53 bits scaled to `[0, 1)`.
    fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
