//! Pinned pseudo-random number generation.
//!
//! Experiment outputs must be reproducible bit-for-bit across builds, so the
//! generator is implemented here rather than taken from a crate whose stream
//! could change between versions. The algorithms are fixed:
//!
//! * state update: SplitMix64 (`state += 0x9E3779B97F4A7C15`, output mixed
//!   with the murmur-style finalizer);
//! * uniform `f64`: top 53 bits scaled to `[0, 1)`;
//! * uniform index in `0..n`: rejection sampling on the largest multiple of
//!   `n` below `2^64`, then a modulo (unbiased);
//! * standard normal: Box–Muller on two consecutive uniforms, the paired
//!   draw is cached and returned on the next call.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 generator with a Box–Muller normal cache.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
    cached_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            state: seed,
            cached_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform row index from `0..n`.
    ///
    /// # Panics
    /// Panics if `n == 0`.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        assert!(n > 0, "next_index requires n >= 1");
        let n = n as u64;
        // Largest multiple of n representable in u64; draws past it are rejected.
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Standard normal draw (zero mean, unit variance).
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        // u1 in (0, 1] so the logarithm is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fills a vector with standard normal draws.
    pub fn standard_normal_vec(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.next_standard_normal()).collect()
    }
}

/// Derives a child seed from a master seed and a list of stream labels
/// (experiment cell indices, run indices, purpose tags).
///
/// The derivation folds each part into the state with the SplitMix64
/// finalizer, so distinct label tuples give decorrelated streams.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut s = mix(master ^ 0x243F_6A88_85A3_08D3);
    for &p in parts {
        s = mix(s.wrapping_add(GAMMA) ^ mix(p.wrapping_add(GAMMA)));
    }
    s
}

/// Stream labels used by the experiment harness.
pub mod tags {
    /// Noise realization stream.
    pub const NOISE: u64 = 1;
    /// Row index sampling stream for the primary run.
    pub const SGD: u64 = 2;
    /// Row index sampling stream for the independent second run.
    pub const INDEPENDENT: u64 = 3;
    /// Auxiliary streams (synthetic problems, sweeps).
    pub const PROBLEM: u64 = 4;
}
