use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-addressed Brownian increments: the increment of particle `k`
/// of species `i` in replica `r` at step `n` depends only on the master
/// seed and `(r, i, k, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
    key: [u8; 32],
}

/// Replica indices must fit below this bound.
pub const MAX_REPLICAS: usize = 1 << 23;
/// Species indices must fit below this bound.
pub const MAX_SPECIES: usize = 1 << 8;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        Self { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn stream_id(replica: usize, species: usize, particle: usize) -> u64 {
        debug_assert!(replica < MAX_REPLICAS && species < MAX_SPECIES && particle < 1 << 32);
        ((replica as u64) << 40) | ((species as u64) << 32) | particle as u64
    }

    /// Writes `ΔW ~ N(0, dt I_d)` into `out` (`d = out.len()`).
    pub fn increment(&self, replica: usize, species: usize, particle: usize, step: usize, dt: f64, out: &mut [f64]) {
        let pairs = out.len().div_ceil(2);
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(Self::stream_id(replica, species, particle));
        rng.set_word_pos(step as u128 * 4 * pairs as u128);
        let scale = dt.sqrt();
        for chunk in out.chunks_mut(2) {
            // u1 in (0, 1] keeps the logarithm finite
            let u1 = ((rng.next_u64() >> 11) + 1) as f64 * UNIT;
            let u2 = (rng.next_u64() >> 11) as f64 * UNIT;
            let radius = (-2.0 * u1.ln()).sqrt() * scale;
            let (sin, cos) = (TWO_PI * u2).sin_cos();
            chunk[0] = radius * cos;
            if chunk.len() > 1 {
                chunk[1] = radius * sin;
            }
        }
    }

    /// Independent generator for initial sampling of one species in one
    /// replica, disjoint from every increment stream.
    pub(crate) fn sampler(&self, replica: usize, species: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream((1u64 << 63) | ((replica as u64) << 8) | species as u64);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_reproduce_bitwise() {
        let s = NoiseStream::new(42);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        s.increment(3, 1, 77, 12, 0.01, &mut a);
        NoiseStream::new(42).increment(3, 1, 77, 12, 0.01, &mut b);
        assert_eq!(a, b);
        s.increment(3, 1, 77, 13, 0.01, &mut b);
        assert_ne!(a, b);
        s.increment(3, 1, 78, 12, 0.01, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn increments_have_step_variance() {
        let s = NoiseStream::new(7);
        let dt = 0.04;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let n = 20_000;
        let mut out = [0.0; 3];
        for k in 0..n {
            s.increment(0, 0, k, 5, dt, &mut out);
            for v in out {
                sum += v;
                sum2 += v * v;
            }
        }
        let m = 3.0 * n as f64;
        let mean = sum / m;
        let var = sum2 / m - mean * mean;
        assert!(mean.abs() < 4.0 * (dt / m).sqrt());
        assert!((var / dt - 1.0).abs() < 0.03);
    }
}
