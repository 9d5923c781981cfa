//! Content-addressed random substreams.
//!
//! Every random draw in the crate comes from a [`RngStream`], which is a
//! ChaCha8 generator keyed by `(seed, trial, entity, purpose)`. Two streams
//! with different addresses are statistically independent; the same address
//! always reproduces the same draws, regardless of the order in which
//! streams are created. That property is what makes trial-level parallelism
//! deterministic: workers never share generator state.
//!
//! The key derivation is a SplitMix64 absorb of the address components into
//! a 256-bit ChaCha key. Both primitives are fixed by this module and
//! stamped into output manifests as [`ALGORITHM_ID`], so results stay
//! reproducible across platforms and releases.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Identifier written to run manifests.
pub const ALGORITHM_ID: &str = "chacha8-splitmix64/v1";

/// What a substream is used for. Part of the stream address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// A database user's latent ratings and target noise.
    Ratings,
    /// A database user's mask sequence.
    Mask,
    /// The reveal-set process.
    Reveal,
    /// The new user's latent ratings.
    NewUserRatings,
    /// The new user's mask.
    NewUserMask,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Ratings => 1,
            Purpose::Mask => 2,
            Purpose::Reveal => 3,
            Purpose::NewUserRatings => 4,
            Purpose::NewUserMask => 5,
        }
    }
}

/// Address of one substream under a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub trial: u64,
    pub entity: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(trial: u64, entity: u64, purpose: Purpose) -> Self {
        StreamKey {
            trial,
            entity,
            purpose,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a tag into a seed, producing an independent derived seed.
///
/// Used to give each experiment row (e.g. each database size n) its own
/// seed space while keeping the `(trial, entity, purpose)` addressing
/// inside a row.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut state = seed ^ 0xA076_1D64_78BD_642F;
    let a = splitmix64(&mut state);
    state ^= tag;
    let b = splitmix64(&mut state);
    a ^ b.rotate_left(17)
}

/// A deterministic substream with the crate's documented draw primitives.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, key: StreamKey) -> Self {
        let mut state = seed;
        let mut absorb = |word: u64| {
            state ^= word;
            splitmix64(&mut state)
        };
        let mut material = [0u64; 4];
        material[0] = absorb(key.trial);
        material[1] = absorb(key.entity);
        material[2] = absorb(key.purpose.code());
        material[3] = absorb(0x5EC5_EC5E_C5EC_5EC5);
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes.chunks_exact_mut(8).zip(material) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        RngStream {
            rng: ChaCha8Rng::from_seed(bytes),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random mantissa bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]` (closed on the left, open on the right up to
    /// rounding).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit() * (hi - lo)
    }

    /// Uniform in `0..m`, unbiased (rejection sampling).
    pub fn below(&mut self, m: u64) -> u64 {
        assert!(m > 0, "below(0)");
        let zone = u64::MAX - u64::MAX % m;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % m;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform m-subset of `{1, ..., d}`, returned sorted.
    ///
    /// Partial Fisher-Yates over the index pool, so every m-subset has
    /// probability `1 / C(d, m)`.
    pub fn subset(&mut self, d: usize, m: usize) -> Vec<usize> {
        assert!(m <= d, "subset size {m} exceeds universe {d}");
        let mut pool: Vec<usize> = (1..=d).collect();
        for slot in 0..m {
            let j = slot + self.below((d - slot) as u64) as usize;
            pool.swap(slot, j);
        }
        let mut picked = pool[..m].to_vec();
        picked.sort_unstable();
        picked
    }

    /// Uniform pick from a non-empty slice.
    pub fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        assert!(!items.is_empty(), "pick from empty slice");
        items[self.below(items.len() as u64) as usize]
    }
}
