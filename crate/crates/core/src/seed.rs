//! Stable seed derivation.
//!
//! Cell and participant streams are keyed by content (master seed, parameter
//! values, labels), never by execution order, so adding work items or
//! changing the thread count leaves every existing stream untouched. The
//! mixing function is fixed here rather than borrowed from `std::hash`, whose
//! output is not guaranteed stable across releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incremental builder for a derived 64-bit seed.
#[derive(Clone, Copy, Debug)]
pub struct SeedKey(u64);

impl SeedKey {
    pub fn new(master: u64) -> Self {
        SeedKey(splitmix64(master))
    }

    pub fn mix_u64(self, v: u64) -> Self {
        SeedKey(splitmix64(self.0 ^ splitmix64(v)))
    }

    /// Mixes a float by value. The value is first rounded to 10 decimals so
    /// that grid values computed along different arithmetic paths agree.
    pub fn mix_f64(self, v: f64) -> Self {
        let r = (v * 1e10).round() / 1e10;
        let r = if r == 0.0 { 0.0 } else { r };
        self.mix_u64(r.to_bits())
    }

    pub fn mix_str(self, s: &str) -> Self {
        let mut k = self.mix_u64(s.len() as u64);
        for chunk in s.as_bytes().chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            k = k.mix_u64(u64::from_le_bytes(buf));
        }
        k
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn stream(self) -> Stream {
        Stream::seed_from_u64(self.0)
    }
}
