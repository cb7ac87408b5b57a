use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Name recorded in manifests; changing the generator changes every result.
pub const RNG_ALGORITHM: &str = "chacha20/rand_chacha-0.9";

/// Seeded random stream used throughout the simulator.
///
/// Independent substreams come from [`SimRng::stream`], which keeps the seed
/// and selects a distinct ChaCha stream id, so a task can hand out one stream
/// per consumer (bits, noise, channel draw) without them overlapping.
#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn bit(&mut self) -> u8 {
        (self.inner.random::<u32>() >> 31) as u8
    }

    pub fn bits(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.bit()).collect()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Circular complex Gaussian with E|z|^2 = `power`.
    pub fn complex_gaussian(&mut self, power: f64) -> Complex64 {
        let s = (power / 2.0).sqrt();
        Complex64::new(self.gaussian() * s, self.gaussian() * s)
    }

    /// Uniform phasor on the unit circle.
    pub fn phasor(&mut self) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.uniform())
    }

    /// Random unit-power QPSK point.
    pub fn qpsk_symbol(&mut self) -> Complex64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re = if self.bit() == 0 { s } else { -s };
        let im = if self.bit() == 0 { s } else { -s };
        Complex64::new(re, im)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.inner
    }
}

/// Derives a child seed from a parent seed and an index (SplitMix64 finalizer).
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
