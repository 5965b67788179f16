//! Seedable xoshiro256** streams keyed by `(seed, stream_id)`.
//!
//! The generator state is filled from a SplitMix64 sequence whose starting
//! point is `mix64(mix64(seed) ^ (stream_id + 1) * GOLDEN)`. Everything is
//! plain 64-bit integer arithmetic, so sequences are identical on every
//! platform and easy to reproduce in other languages.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    mix64(*state)
}

/// Single-owner pseudo-random stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    s: [u64; 4],
    seed: u64,
    stream_id: u64,
}

/// Deterministic stream for `(seed, stream_id)`.
pub fn make_rng(seed: u64, stream_id: u64) -> RngStream {
    RngStream::new(seed, stream_id)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut sm = mix64(seed) ^ stream_id.wrapping_add(1).wrapping_mul(GOLDEN);
        let mut s = [0u64; 4];
        for w in &mut s {
            *w = splitmix_next(&mut sm);
        }
        if s == [0; 4] {
            s[0] = 1;
        }
        RngStream { s, seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the polar Box-Muller method; the second variate
    /// of each accepted pair is discarded.
    pub fn standard_normal(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }
}

/// One draw from `N(mean, sd^2)`.
pub fn sample_normal(rng: &mut RngStream, mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::invalid(format!("normal sd must be positive, got {sd}")));
    }
    Ok(mean + sd * rng.standard_normal())
}
