use ndarray::Array2;

use super::stft::stft_matrix;
use super::{FeatureKind, Spectrogram, SpectrogramParams};
use crate::audio_io::{AudioBuffer, AudioWindow};
use crate::error::{Error, Result};

/// Power floor applied before taking logarithms.
pub const DB_FLOOR_AMIN: f64 = 1e-10;
/// Dynamic range kept below the loudest cell, in dB.
pub const DB_TOP_RANGE: f64 = 80.0;
/// Embedding frames are square: this many Mel bands and this many frames.
pub const EMBEDDING_SIZE: usize = 128;
pub const EMBEDDING_N_FFT: usize = 4096;

// Slaney mel scale: linear below 1 kHz, logarithmic above.
const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    } else {
        hz / F_SP
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    } else {
        F_SP * mel
    }
}

/// Triangular Mel filterbank with Slaney area normalization, shape
/// (n_mels, n_fft/2 + 1), covering `fmin..fmax` Hz.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Array2<f64> {
    let bins = n_fft / 2 + 1;
    let fft_freqs: Vec<f64> = (0..bins)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect();
    let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let mut fb = Array2::<f64>::zeros((n_mels, bins));
    for m in 0..n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let enorm = 2.0 / (right - left);
        for (k, &f) in fft_freqs.iter().enumerate() {
            let lower = (f - left) / (center - left);
            let upper = (right - f) / (right - center);
            let w = lower.min(upper).max(0.0);
            fb[[m, k]] = w * enorm;
        }
    }
    fb
}

fn mel_power_of(samples: &[f32], sample_rate: u32, n_fft: usize, hop: usize, n_mels: usize) -> Result<Array2<f64>> {
    let mut power = stft_matrix(samples, n_fft, hop)?;
    power.mapv_inplace(|m| m * m);
    let fb = mel_filterbank(sample_rate, n_fft, n_mels, 0.0, sample_rate as f64 / 2.0);
    Ok(fb.dot(&power))
}

/// Mel-projected power spectrogram (before dB conversion).
pub fn mel_power(buf: &AudioBuffer, params: &SpectrogramParams) -> Result<Array2<f64>> {
    params.validate()?;
    mel_power_of(buf.samples(), buf.sample_rate(), params.n_fft, params.hop, params.n_mels)
}

/// `10*log10(max(x, 1e-10))`, clamped to 80 dB below the maximum.
pub fn power_to_db(power: &mut Array2<f64>) {
    power.mapv_inplace(|x| 10.0 * x.max(DB_FLOOR_AMIN).log10());
    let top = power.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = top - DB_TOP_RANGE;
    power.mapv_inplace(|x| x.max(floor));
}

/// dB-scaled Mel spectrogram. The buffer's own sample rate is used.
pub fn mel_spectrogram(buf: &AudioBuffer, params: &SpectrogramParams) -> Result<Spectrogram> {
    let mut data = mel_power(buf, params)?;
    power_to_db(&mut data);
    let params = SpectrogramParams {
        sample_rate: buf.sample_rate(),
        ..*params
    };
    Spectrogram::new(
        data,
        buf.sample_rate() as f64 / params.hop as f64,
        FeatureKind::Mel,
        params,
    )
}

/// Square 128x128 dB-Mel image of a window, the network input format.
///
/// Hop is `floor(len / 128)`; the centered STFT yields one extra frame,
/// which is dropped. Short windows are padded with the matrix minimum.
pub fn embedding_frame(win: &AudioWindow) -> Result<Array2<f64>> {
    let hop = win.len() / EMBEDDING_SIZE;
    if hop == 0 {
        return Err(Error::Size(format!(
            "window of {} samples is shorter than {EMBEDDING_SIZE}",
            win.len()
        )));
    }
    let mut mel = mel_power_of(&win.samples, win.sample_rate, EMBEDDING_N_FFT, hop, EMBEDDING_SIZE)?;
    power_to_db(&mut mel);

    let floor = mel.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out = Array2::from_elem((EMBEDDING_SIZE, EMBEDDING_SIZE), floor);
    let keep = mel.ncols().min(EMBEDDING_SIZE);
    out.slice_mut(ndarray::s![.., ..keep])
        .assign(&mel.slice(ndarray::s![.., ..keep]));
    Ok(out)
}
