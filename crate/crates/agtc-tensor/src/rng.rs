//! Counter-based pseudo-random stream.
//!
//! Draw `k` is a pure function of `(seed, k)` (SplitMix64 finalizer over a
//! Weyl sequence), so identical `(seed, counter)` pairs always reproduce the
//! same values; that is the reproducibility contract behind seeded runs.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> RngStream {
        RngStream { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Independent stream derived from this one's seed and a tag
    /// (e.g. one substream per training epoch or per CV fold).
    pub fn substream(&self, tag: u64) -> RngStream {
        RngStream { seed: mix(self.seed ^ mix(tag.wrapping_add(GAMMA))), counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let z = self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)).wrapping_add(GAMMA);
        self.counter += 1;
        mix(z)
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform01() < p
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.uniform01() * n as f64) as usize % n
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
