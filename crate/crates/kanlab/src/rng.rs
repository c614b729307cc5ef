//! Deterministic random numbers with a pinned bit-exact algorithm.
//!
//! Reproducibility here means byte-identical artifacts across platforms and
//! releases, so the generator is fully specified rather than delegated to a
//! crate whose stream might change between versions:
//!
//! * state seeding: SplitMix64 applied four times to the `u64` seed,
//! * generation: xoshiro256** (public domain, Blackman/Vigna),
//! * `uniform`: 53-bit mantissa mapping `(x >> 11) * 2^-53` into `[0, 1)`,
//! * `bernoulli(p)`: exactly one `uniform` draw, true iff `u < p`,
//! * `normal`: Box-Muller, exactly two `uniform` draws per call, no caching.
//!
//! Every consumer derives its own named stream via [`Rng::derive`], so adding
//! a draw in one part of a model never shifts the stream seen by another.

/// Counter-backed xoshiro256** generator.
#[derive(Debug, Clone)]
pub struct Rng {
    s: [u64; 4],
    draws: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// FNV-1a over the little-endian seed bytes then each label's UTF-8 bytes,
/// with a 0xFF separator after every field so `("ab","c")` and `("a","bc")`
/// land in different streams.
fn stream_hash(seed: u64, labels: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(PRIME);
    }
    h = (h ^ 0xFF).wrapping_mul(PRIME);
    for label in labels {
        for b in label.bytes() {
            h = (h ^ b as u64).wrapping_mul(PRIME);
        }
        h = (h ^ 0xFF).wrapping_mul(PRIME);
    }
    h
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { s, draws: 0 }
    }

    /// Independent child stream for `(seed, labels...)`. Derivation hashes the
    /// labels into a fresh seed, so streams are stable under unrelated code
    /// changes and two distinct label paths practically never collide.
    pub fn derive(seed: u64, labels: &[&str]) -> Self {
        Rng::from_seed(stream_hash(seed, labels))
    }

    /// The seed [`Rng::derive`] would use, for APIs that take a plain seed.
    pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
        stream_hash(seed, labels)
    }

    /// Raw xoshiro256** output; one draw.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1]
            .wrapping_mul(5)
            .rotate_left(7)
            .wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        self.draws += 1;
        result
    }

    /// Number of `next_u64` calls consumed so far. Tests use this to pin the
    /// per-call draw budget of the derived samplers.
    pub fn draw_count(&self) -> u64 {
        self.draws
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits; one draw.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`; one draw.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// True with probability `p`; always exactly one draw, even for the
    /// degenerate p = 0 and p = 1 cases, so stream positions stay aligned
    /// across probability sweeps.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        assert!((0.0..=1.0).contains(&p), "bernoulli p out of range: {p}");
        self.uniform() < p
    }

    /// Standard normal via Box-Muller; exactly two draws per call.
    pub fn normal(&mut self) -> f64 {
        // u1 is mapped away from 0 so ln(u1) is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, bound)` by rejection, so every value has equal
    /// probability (no modulo bias). Draw count varies; shuffles consume it
    /// atomically before any dependent sampling.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % bound;
            }
        }
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
