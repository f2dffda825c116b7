use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;

use super::{require_power_of_two, FeatureKind, Spectrogram, SpectrogramParams};
use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::fft;

/// Frames produced by a centered STFT: `1 + floor(len / hop)`.
pub fn frame_count(len: usize, hop: usize) -> usize {
    1 + len / hop
}

/// Mirror an index into `[0, len)` without repeating the edge sample.
fn reflect(i: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let r = i.rem_euclid(period);
    if r < len as i64 {
        r as usize
    } else {
        (period - r) as usize
    }
}

pub(crate) fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Magnitude STFT of raw samples, shape (n_fft/2 + 1, 1 + len/hop).
pub(crate) fn stft_matrix(samples: &[f32], n_fft: usize, hop: usize) -> Result<Array2<f64>> {
    require_power_of_two(n_fft)?;
    if hop == 0 {
        return Err(Error::Argument("hop must be at least 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("stft of an empty signal".into()));
    }

    let pad = (n_fft / 2) as i64;
    let len = samples.len();
    let padded: Vec<f64> = (-pad..len as i64 + pad)
        .map(|i| samples[reflect(i, len)] as f64)
        .collect();

    let window = periodic_hann(n_fft);
    let frames = frame_count(len, hop);
    let bins = n_fft / 2 + 1;
    let plan = fft::forward(n_fft);
    let mut scratch = vec![Complex::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut out = Array2::<f64>::zeros((bins, frames));

    for t in 0..frames {
        let start = t * hop;
        for ((slot, &x), &w) in buf.iter_mut().zip(&padded[start..start + n_fft]).zip(&window) {
            *slot = Complex::new(x * w, 0.0);
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for (b, v) in buf[..bins].iter().enumerate() {
            out[[b, t]] = v.norm();
        }
    }
    Ok(out)
}

/// Centered, Hann-windowed STFT magnitude.
pub fn stft_magnitude(buf: &AudioBuffer, n_fft: usize, hop: usize) -> Result<Spectrogram> {
    let data = stft_matrix(buf.samples(), n_fft, hop)?;
    let params = SpectrogramParams {
        n_fft,
        hop,
        sample_rate: buf.sample_rate(),
        ..SpectrogramParams::default()
    };
    Spectrogram::new(
        data,
        buf.sample_rate() as f64 / hop as f64,
        FeatureKind::Linear,
        params,
    )
}
