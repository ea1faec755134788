//! Counter-addressable random streams.
//!
//! Every sample is a pure function of `(seed, path)`: a stream is a ChaCha8
//! generator keyed by the seed and positioned on a 64-bit stream id derived
//! from the path, so parallel trials never share state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type Rand = ChaCha8Rng;

/// Address of a random stream: a root seed plus a path of child indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stream {
    seed: u64,
    id: u64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { seed, id: 0 }
    }

    /// Child stream `i`; distinct paths give distinct stream ids with
    /// overwhelming probability.
    pub fn child(&self, i: u64) -> Self {
        Stream {
            seed: self.seed,
            id: mix(self.id ^ mix(i.wrapping_add(0x9e37_79b9_7f4a_7c15))),
        }
    }

    /// Named child, for readable stream paths.
    pub fn named(&self, name: &str) -> Self {
        let h = name
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        self.child(h)
    }

    pub fn rng(&self) -> Rand {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&mix(self.seed).to_le_bytes());
        let mut r = ChaCha8Rng::from_seed(key);
        r.set_stream(self.id);
        r
    }
}

/// Geometric variable on {0,1,...} with P(k) = (1-q) q^k.
pub fn geometric<R: Rng + ?Sized>(rng: &mut R, q: f64) -> u64 {
    if q <= 0.0 {
        return 0;
    }
    let mut k = 0;
    while rng.gen::<f64>() < q {
        k += 1;
    }
    k
}

/// Uniform increment in {-1, 0, 1}.
pub fn increment<R: Rng + ?Sized>(rng: &mut R) -> i64 {
    rng.gen_range(-1..=1)
}
