//! Deterministic inputs shared by the benchmarks.

use birdmotif::AudioBuffer;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SAMPLE_RATE: u32 = 22050;

/// Uniform random (bins x frames) matrix.
pub fn random_matrix(bins: usize, frames: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((bins, frames), |_| rng.random::<f64>())
}

/// Noise with a slow frequency sweep, `seconds` long at 22050 Hz.
pub fn track(seconds: f64, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * SAMPLE_RATE as f64).round() as usize;
    let mut phase = 0.0f64;
    let samples = (0..n)
        .map(|i| {
            let f = 500.0 + 2000.0 * (i as f64 / n as f64);
            phase += std::f64::consts::TAU * f / SAMPLE_RATE as f64;
            (0.3 * phase.sin() + rng.random_range(-0.05..0.05)) as f32
        })
        .collect();
    AudioBuffer::new(samples, SAMPLE_RATE, format!("bench{seed}")).expect("non-empty, finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_requested_sizes() {
        assert_eq!(random_matrix(12, 292, 0).dim(), (12, 292));
        assert_eq!(track(1.0, 0).len(), 22050);
        assert_eq!(random_matrix(2, 3, 5), random_matrix(2, 3, 5));
    }
}
