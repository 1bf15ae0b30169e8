//! Deterministic random streams.
//!
//! Every stream is a SplitMix64 generator. Child streams are derived with
//! [`mix64`], so trajectory `i` of a dataset, batch shuffles of epoch `e`,
//! jitter of worker `w` etc. all hang off a single root seed and never depend
//! on scheduling order. Both functions are fully specified below, which makes
//! the streams reproducible from any language.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of child stream `index` from `base`.
///
/// `mix64(b, i) = fmix64(fmix64(b) ^ (i + 1) * GOLDEN)` (wrapping arithmetic).
#[inline]
pub fn mix64(base: u64, index: u64) -> u64 {
    fmix64(fmix64(base) ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
    spare: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, spare: None }
    }

    /// Stream for child `index` of `base`.
    pub fn child(base: u64, index: u64) -> Self {
        Self::new(mix64(base, index))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        fmix64(self.state)
    }

    /// Uniform on [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in the closed range `[lo, hi]`.
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        // Multiply-shift reduction; bias is below 2^-40 for the spans used here.
        lo + ((self.next_u64() as u128 * span as u128) >> 64) as u64
    }

    /// Standard normal via Box–Muller. Draws come in pairs: the first call of
    /// a pair returns the cosine branch, the second the cached sine branch.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps ln finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_int(0, i as u64) as usize;
            items.swap(i, j);
        }
    }
}
