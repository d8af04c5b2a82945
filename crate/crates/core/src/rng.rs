//! Deterministic counter-based random number generation.
//!
//! Every random quantity in the crate is addressed by a `(key, counter)`
//! pair: the key names a logical stream (derived from the master seed plus
//! tags such as a domain constant, a trial index, or a codeword index) and
//! the counter enumerates draws within that stream. Two properties follow:
//!
//! - **Random access.** Codebook letters can be evaluated at any time index
//!   without generating the prefix, so lazy codebooks are reproducible
//!   regardless of evaluation order.
//! - **Schedule independence.** Each Monte Carlo trial owns its key, so a
//!   run's output is a pure function of the master seed and trial count,
//!   independent of how trials are distributed over worker threads.
//!
//! The word function is the SplittableRandom construction: the avalanche
//! finalizer `mix64` applied to `key + counter * GOLDEN`. Normal variates
//! use the Box–Muller transform, which consumes exactly two words per pair
//! and therefore keeps counter arithmetic trivial.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Bijective 64-bit avalanche mix (the SplitMix64 finalizer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `ctr`-th word of the stream named by `key`.
#[inline]
pub fn word(key: u64, ctr: u64) -> u64 {
    mix64(key.wrapping_add(ctr.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Derives a child key from a parent key and a tag.
#[inline]
pub fn derive_key(parent: u64, tag: u64) -> u64 {
    mix64(parent ^ mix64(tag ^ 0x517C_C1B7_2722_0A95))
}

/// Derives a stream key from a master seed and a list of tags
/// (conventionally `[domain, ...indices]`).
pub fn stream_key(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(seed), |k, &t| derive_key(k, t))
}

/// Domain tags for the crate's independent randomness streams.
///
/// Keeping them in one table makes accidental reuse easy to spot.
pub mod domain {
    pub const LADDER: u64 = 1;
    pub const WALK_MIN: u64 = 2;
    pub const OVERSHOOT: u64 = 3;
    pub const CROSSING: u64 = 4;
    pub const WALD: u64 = 5;
    pub const MASS_TRUE: u64 = 6;
    pub const MASS_SWITCHED: u64 = 7;
    pub const FALSE_WALK: u64 = 8;
    pub const COUPLED: u64 = 9;
    pub const CODEBOOK: u64 = 10;
    pub const CODEBOOK_USER1: u64 = 11;
    pub const CODEBOOK_USER2: u64 = 12;
    pub const CHANNEL_NOISE: u64 = 13;
    pub const WRAPPER_COIN: u64 = 14;
    pub const INNER_COIN: u64 = 15;
    pub const CALIBRATION: u64 = 16;
    pub const MOMENTS: u64 = 17;
}

/// A sequential view of one keyed counter stream.
///
/// `normal` hands out Box–Muller pairs one value at a time; the spare value
/// is cached, so consumption stays a fixed two words per two normals and the
/// sequence is a pure function of the key.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    ctr: u64,
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream {
            key,
            ctr: 0,
            spare_normal: None,
        }
    }

    /// Stream for one trial of one experiment domain.
    pub fn for_trial(seed: u64, domain: u64, trial: u64) -> Self {
        Stream::new(stream_key(seed, &[domain, trial]))
    }

    /// Stream for one trial of a per-walk experiment.
    pub fn for_walk_trial(seed: u64, domain: u64, walk_index: usize, trial: u64) -> Self {
        Stream::new(stream_key(seed, &[domain, walk_index as u64, trial]))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = word(self.key, self.ctr);
        self.ctr += 1;
        v
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_NEG_53
    }

    /// Uniform on `(0, 1]`; safe as a logarithm argument.
    #[inline]
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * TWO_NEG_53
    }

    /// Standard normal variate.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        let (a, b) = self.normal_pair();
        self.spare_normal = Some(b);
        a
    }

    /// One Box–Muller pair (consumes exactly two words).
    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let r = (-2.0 * self.uniform_open().ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * self.uniform()).sin_cos();
        (r * c, r * s)
    }

    #[inline]
    /// Uniform integer in `[0, m)` via the multiply-shift reduction (bias
    /// below 2^-64, far under any Monte Carlo resolution used here).
    pub fn uniform_below(&mut self, m: u64) -> u64 {
        debug_assert!(m > 0);
        ((self.next_u64() as u128 * m as u128) >> 64) as u64
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// Standard normal addressed by index within a keyed stream.
///
/// Letter `n` consumes exactly words `2n` and `2n + 1`, so any letter can be
/// produced in O(1) without touching the rest of the stream. (Only the
/// cosine branch of the Box–Muller pair is used.)
#[inline]
pub fn indexed_normal(key: u64, index: u64) -> f64 {
    let u1 = ((word(key, 2 * index) >> 11) + 1) as f64 * TWO_NEG_53;
    let u2 = (word(key, 2 * index + 1) >> 11) as f64 * TWO_NEG_53;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
