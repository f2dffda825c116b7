//! CENS (chroma energy normalized statistics).
//!
//! Chroma is obtained by folding STFT bin energy onto the 12 pitch classes
//! (row 0 = C, row 9 = A, A4 = 440 Hz) rather than through a constant-Q
//! transform. The remaining chain follows the usual CENS recipe.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};

use super::stft::{frame_count, stft_matrix};
use super::{FeatureKind, Spectrogram, SpectrogramParams};
use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};

pub const CHROMA_N_FFT: usize = 4096;
/// Upper bound on the analysis hop; see [`cens_analysis_hop`].
pub const CHROMA_HOP: usize = 512;
/// Bins below this frequency are not folded into chroma.
pub const CHROMA_FMIN_HZ: f64 = 65.0;
/// Length of the temporal Hann smoothing window, in STFT frames.
pub const CENS_SMOOTH_LEN: usize = 41;

const QUANT_THRESHOLDS: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
const NORM_EPS: f64 = 1e-12;

fn pitch_class(freq: f64) -> usize {
    let midi = 69.0 + 12.0 * (freq / 440.0).log2();
    (midi.round() as i64).rem_euclid(12) as usize
}

fn fold_chroma(power: &Array2<f64>, sample_rate: u32) -> Array2<f64> {
    let frames = power.ncols();
    let mut chroma = Array2::<f64>::zeros((12, frames));
    for (k, row) in power.axis_iter(Axis(0)).enumerate().skip(1) {
        let freq = k as f64 * sample_rate as f64 / CHROMA_N_FFT as f64;
        if freq < CHROMA_FMIN_HZ {
            continue;
        }
        let mut target = chroma.row_mut(pitch_class(freq));
        target += &row;
    }
    chroma
}

fn quantize(x: f64) -> f64 {
    QUANT_THRESHOLDS.iter().filter(|&&t| x > t).count() as f64 * 0.25
}

/// Symmetric Hann of `len + 2` points without its zero endpoints, unit sum.
fn smoothing_kernel(len: usize) -> Vec<f64> {
    let n = len + 1;
    let mut w: Vec<f64> = (1..=len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Same-size convolution along time with zero boundaries.
fn smooth_rows(x: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let (rows, frames) = x.dim();
    let half = (kernel.len() / 2) as i64;
    let mut out = Array2::<f64>::zeros((rows, frames));
    for r in 0..rows {
        for t in 0..frames as i64 {
            let mut acc = 0.0;
            for (k, &w) in kernel.iter().enumerate() {
                let src = t + k as i64 - half;
                if (0..frames as i64).contains(&src) {
                    acc += w * x[[r, src as usize]];
                }
            }
            out[[r, t as usize]] = acc;
        }
    }
    out
}

fn normalize_columns(x: &mut Array2<f64>, l1: bool) {
    for mut col in x.axis_iter_mut(Axis(1)) {
        let norm = if l1 {
            col.iter().map(|v| v.abs()).sum::<f64>()
        } else {
            col.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        if norm > NORM_EPS {
            col.mapv_inplace(|v| v / norm);
        } else {
            col.fill(0.0);
        }
    }
}

/// STFT hop used for a CENS output rate.
///
/// When `sample_rate / target_fps` is a whole number of samples with a
/// divisor in `[CHROMA_HOP / 2, CHROMA_HOP]`, the largest such divisor is
/// used, so every output frame is an analysis frame and input shifted by a
/// whole output frame yields the same feature columns. Otherwise the hop is
/// `CHROMA_HOP` and output frames are interpolated.
pub fn cens_analysis_hop(sample_rate: u32, target_fps: u32) -> usize {
    if target_fps == 0 || sample_rate % target_fps != 0 {
        return CHROMA_HOP;
    }
    let period = (sample_rate / target_fps) as usize;
    (CHROMA_HOP / 2..=CHROMA_HOP)
        .rev()
        .find(|d| period % d == 0)
        .unwrap_or(CHROMA_HOP)
}

/// 12-row CENS chromagram sampled at `target_fps` frames per second.
///
/// The output has `1 + floor(len / (sample_rate / target_fps))` frames, each
/// of unit L2 norm, or all zero where the input is silent.
pub fn cens_chromagram(buf: &AudioBuffer, target_fps: u32) -> Result<Spectrogram> {
    if target_fps == 0 {
        return Err(Error::Argument("target_fps must be at least 1".into()));
    }
    if buf.len() < CHROMA_N_FFT {
        return Err(Error::EmptyInput(format!(
            "{} samples is shorter than one {CHROMA_N_FFT}-sample analysis window",
            buf.len()
        )));
    }
    let rate = buf.sample_rate();

    let hop = cens_analysis_hop(rate, target_fps);
    let mut power = stft_matrix(buf.samples(), CHROMA_N_FFT, hop)?;
    power.mapv_inplace(|m| m * m);
    let mut chroma = fold_chroma(&power, rate);
    normalize_columns(&mut chroma, true);
    chroma.mapv_inplace(quantize);
    let smooth = smooth_rows(&chroma, &smoothing_kernel(CENS_SMOOTH_LEN));

    // Resample the smoothed sequence onto the target frame grid.
    let out_hop = rate as f64 / target_fps as f64;
    let out_frames = 1 + (buf.len() as f64 / out_hop).floor() as usize;
    let last = smooth.ncols() - 1;
    let mut out = Array2::<f64>::zeros((12, out_frames));
    for k in 0..out_frames {
        let pos = (k as f64 * out_hop / hop as f64).min(last as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(last);
        let frac = pos - lo as f64;
        for r in 0..12 {
            out[[r, k]] = smooth[[r, lo]] * (1.0 - frac) + smooth[[r, hi]] * frac;
        }
    }
    normalize_columns(&mut out, false);

    debug_assert_eq!(smooth.ncols(), frame_count(buf.len(), hop));
    let params = SpectrogramParams {
        n_fft: CHROMA_N_FFT,
        hop,
        target_fps,
        sample_rate: rate,
        ..SpectrogramParams::default()
    };
    Spectrogram::new(out, target_fps as f64, FeatureKind::Cens, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone(freq: f64, seconds: f64) -> AudioBuffer {
        let rate = 22050;
        let n = (seconds * rate as f64) as usize;
        let s = (0..n)
            .map(|i| (0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect();
        AudioBuffer::new(s, rate, "tone").unwrap()
    }

    #[test]
    fn pitch_classes() {
        assert_eq!(pitch_class(440.0), 9);
        assert_eq!(pitch_class(261.63), 0);
        assert_eq!(pitch_class(880.0), 9);
        assert_eq!(pitch_class(466.16), 10);
    }

    #[test]
    fn quantization_steps() {
        assert_eq!(quantize(0.05), 0.0);
        assert_eq!(quantize(0.06), 0.25);
        assert_eq!(quantize(0.15), 0.5);
        assert_eq!(quantize(0.3), 0.75);
        assert_eq!(quantize(0.41), 1.0);
    }

    #[test]
    fn analysis_hop_divides_the_output_period() {
        assert_eq!(cens_analysis_hop(22050, 10), 441);
        assert_eq!(cens_analysis_hop(32000, 10), 400);
        assert_eq!(cens_analysis_hop(44100, 10), 490);
        assert_eq!(cens_analysis_hop(22050, 4), CHROMA_HOP);
        assert_eq!(cens_analysis_hop(22050, 7), 450);
        assert_eq!(cens_analysis_hop(16000, 1000), CHROMA_HOP);
    }

    #[test]
    fn whole_frame_shift_shifts_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let base: Vec<f32> = (0..22050 * 6).map(|_| rng.random_range(-0.5..0.5)).collect();
        let shift = 3 * 2205;
        let shifted: Vec<f32> = std::iter::repeat_n(0.0, shift).chain(base.iter().copied()).collect();
        let a = cens_chromagram(&AudioBuffer::new(base, 22050, "a").unwrap(), 10).unwrap();
        let b = cens_chromagram(&AudioBuffer::new(shifted, 22050, "b").unwrap(), 10).unwrap();
        // away from both ends, where smoothing sees only shared signal
        for t in 10..a.frames() - 10 {
            for r in 0..12 {
                assert!((a.data[[r, t]] - b.data[[r, t + 3]]).abs() < 1e-9, "frame {t}");
            }
        }
    }

    #[test]
    fn kernel_has_unit_sum_and_41_taps() {
        let k = smoothing_kernel(CENS_SMOOTH_LEN);
        assert_eq!(k.len(), 41);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(k.iter().all(|&v| v > 0.0));
        assert!((k[0] - k[40]).abs() < 1e-15);
    }

    #[test]
    fn a440_dominates_pitch_class_a() {
        let spec = cens_chromagram(&tone(440.0, 6.0), 10).unwrap();
        let frames = spec.frames();
        let hits = (0..frames)
            .filter(|&t| {
                let col = spec.data.column(t);
                (0..12).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap() == 9
            })
            .count();
        assert!(hits as f64 > 0.9 * frames as f64, "{hits}/{frames}");
    }

    #[test]
    fn frames_are_unit_norm_or_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut samples: Vec<f32> = (0..22050 * 4).map(|_| rng.random_range(-0.3f32..0.3)).collect();
        samples[22050 * 2..].iter_mut().for_each(|s| *s = 0.0);
        let buf = AudioBuffer::new(samples, 22050, "n").unwrap();
        let spec = cens_chromagram(&buf, 10).unwrap();
        for col in spec.data.columns() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-6, "norm {norm}");
        }
        let last = spec.data.column(spec.frames() - 1);
        assert!(last.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn silence_is_all_zero() {
        let buf = AudioBuffer::new(vec![0.0; 22050], 22050, "s").unwrap();
        let spec = cens_chromagram(&buf, 10).unwrap();
        assert_eq!(spec.bins(), 12);
        assert_eq!(spec.frames(), 11);
        assert!(spec.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_is_rejected() {
        let buf = AudioBuffer::new(vec![0.1; 1000], 22050, "s").unwrap();
        assert!(matches!(cens_chromagram(&buf, 10), Err(Error::EmptyInput(_))));
    }
}
