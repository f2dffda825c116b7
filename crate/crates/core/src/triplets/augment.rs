//! Waveform augmentations applied to windows before triplet formation.
//!
//! All of them keep the window length and clip the result to [-1, 1].
//! Randomized ones are pure functions of their inputs and seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioWindow;
use crate::error::{Error, Result};
use crate::fft;

/// Largest absolute circular shift, as a fraction of the window length.
pub const MAX_SHIFT_FRACTION: f64 = 0.1;

fn with_samples(win: &AudioWindow, samples: Vec<f32>) -> AudioWindow {
    AudioWindow {
        samples,
        ..win.clone()
    }
}

fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / samples.len() as f64).sqrt()
}

fn add_clipped(win: &AudioWindow, noise: impl Iterator<Item = f64>) -> AudioWindow {
    let samples = win
        .samples
        .iter()
        .zip(noise)
        .map(|(&s, n)| (s as f64 + n).clamp(-1.0, 1.0) as f32)
        .collect();
    with_samples(win, samples)
}

/// Scales by `10^(gain_db / 20)` and clips.
pub fn apply_gain(win: &AudioWindow, gain_db: f64) -> AudioWindow {
    let factor = 10f64.powf(gain_db / 20.0);
    let samples = win
        .samples
        .iter()
        .map(|&s| (s as f64 * factor).clamp(-1.0, 1.0) as f32)
        .collect();
    with_samples(win, samples)
}

/// Adds white Gaussian noise at the given signal-to-noise ratio in dB.
/// Silent windows are returned unchanged.
pub fn add_noise_snr(win: &AudioWindow, snr_db: f64, rng_seed: u64) -> AudioWindow {
    let signal_rms = rms(&win.samples);
    if signal_rms == 0.0 {
        return win.clone();
    }
    let noise_rms = signal_rms / 10f64.powf(snr_db / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = (0..win.len()).map(move |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * noise_rms
    });
    add_clipped(win, noise)
}

/// Circular shift by `round(shift_fraction * len)` samples; positive delays.
pub fn time_shift(win: &AudioWindow, shift_fraction: f64) -> Result<AudioWindow> {
    if !(shift_fraction.abs() <= MAX_SHIFT_FRACTION) {
        return Err(Error::Argument(format!(
            "shift fraction must lie in [-{MAX_SHIFT_FRACTION}, {MAX_SHIFT_FRACTION}], got {shift_fraction}"
        )));
    }
    let len = win.len();
    let mut samples = win.samples.clone();
    if len > 0 {
        let shift = (shift_fraction * len as f64).round() as i64;
        samples.rotate_right(shift.rem_euclid(len as i64) as usize);
    }
    Ok(with_samples(win, samples))
}

/// Unit-RMS noise with power spectral density proportional to `f^-decay`
/// (decay 0 is white, 1 pink, 2 brown); the DC bin is zeroed.
fn colored_noise_samples(len: usize, decay: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut spec: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(StandardNormal.sample(&mut *rng), 0.0))
        .collect();
    fft::forward(len).process(&mut spec);
    for (k, v) in spec.iter_mut().enumerate() {
        let f = k.min(len - k);
        *v = if f == 0 {
            Complex::new(0.0, 0.0)
        } else {
            *v * (f as f64).powf(-decay / 2.0)
        };
    }
    fft::inverse(len).process(&mut spec);
    let mut out: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let r = (out.iter().map(|x| x * x).sum::<f64>() / len as f64).sqrt();
    if r > 0.0 {
        out.iter_mut().for_each(|x| *x /= r);
    }
    out
}

/// Adds colored noise at `snr_db`. Silent windows are returned unchanged.
pub fn colored_noise(win: &AudioWindow, snr_db: f64, decay: f64, rng_seed: u64) -> AudioWindow {
    let signal_rms = rms(&win.samples);
    if signal_rms == 0.0 || win.len() < 2 {
        return win.clone();
    }
    let noise_rms = signal_rms / 10f64.powf(snr_db / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let noise = colored_noise_samples(win.len(), decay, &mut rng);
    add_clipped(win, noise.into_iter().map(|x| x * noise_rms))
}

/// Ranges the random augmenter draws from. `None` disables a stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub gain_db: Option<(f64, f64)>,
    pub noise_snr_db: Option<(f64, f64)>,
    pub shift_fraction: Option<(f64, f64)>,
    pub colored_snr_db: Option<(f64, f64)>,
    pub colored_decay: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self::embedding()
    }
}

impl AugmentConfig {
    /// Gain in [-20, 20] dB and Gaussian noise at [-5, 40] dB SNR.
    pub fn embedding() -> Self {
        Self {
            gain_db: Some((-20.0, 20.0)),
            noise_snr_db: Some((-5.0, 40.0)),
            shift_fraction: None,
            colored_snr_db: None,
            colored_decay: (-2.0, 2.0),
        }
    }

    /// Gain, a +-10% time shift and colored noise at [-3, 30] dB with
    /// spectral decay in [-2, 2].
    pub fn classifier() -> Self {
        Self {
            gain_db: Some((-20.0, 20.0)),
            noise_snr_db: None,
            shift_fraction: Some((-MAX_SHIFT_FRACTION, MAX_SHIFT_FRACTION)),
            colored_snr_db: Some((-3.0, 30.0)),
            colored_decay: (-2.0, 2.0),
        }
    }
}

/// Applies the enabled stages in order gain, noise, shift, colored noise.
#[derive(Debug, Clone)]
pub struct Augmenter {
    config: AugmentConfig,
}

impl Augmenter {
    pub fn new(config: AugmentConfig) -> Self {
        Self { config }
    }

    pub fn augment(&self, win: &AudioWindow, seed: u64) -> AudioWindow {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let c = &self.config;
        let gain = c.gain_db.map(&mut draw);
        let snr = c.noise_snr_db.map(&mut draw);
        let shift = c.shift_fraction.map(&mut draw);
        let colored = c.colored_snr_db.map(&mut draw);
        let decay = draw(c.colored_decay);
        let noise_seed = rng.random::<u64>();
        let colored_seed = rng.random::<u64>();

        let mut out = win.clone();
        if let Some(g) = gain {
            out = apply_gain(&out, g);
        }
        if let Some(s) = snr {
            out = add_noise_snr(&out, s, noise_seed);
        }
        if let Some(f) = shift {
            out = time_shift(&out, f.clamp(-MAX_SHIFT_FRACTION, MAX_SHIFT_FRACTION))
                .expect("clamped shift is in range");
        }
        if let Some(s) = colored {
            out = colored_noise(&out, s, decay, colored_seed);
        }
        out
    }
}
