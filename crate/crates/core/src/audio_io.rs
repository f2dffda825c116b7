//! Audio decoding, resampling and fixed-length windowing.
//!
//! Only RIFF/WAVE input is decoded here (16/24-bit PCM and 32-bit float).
//! Compressed sources must be transcoded before they reach the pipeline.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Default number of taps of the windowed-sinc resampling kernel.
pub const DEFAULT_RESAMPLE_TAPS: usize = 64;

/// A decoded mono waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
    track_id: String,
}

impl AudioBuffer {
    /// Builds a buffer, rejecting empty, non-finite or zero-rate input.
    pub fn new(samples: Vec<f32>, sample_rate: u32, track_id: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio buffer has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Argument("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("sample {pos} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            track_id: track_id.into(),
        })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn track_id(&self) -> &str {
        &self.track_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }
}

/// A fixed-length slice of a track. The tail window of a track is zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioWindow {
    pub parent_track_id: String,
    pub window_index: usize,
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub start_time_s: f64,
}

impl AudioWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Reinterprets the window as a standalone buffer (for feature extraction).
    pub fn to_buffer(&self) -> Result<AudioBuffer> {
        AudioBuffer::new(
            self.samples.clone(),
            self.sample_rate,
            format!("{}#{}", self.parent_track_id, self.window_index),
        )
    }
}

/// What to do with NaN/Inf samples found in a float WAV file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonFinitePolicy {
    #[default]
    Reject,
    Zero,
}

/// On-disk sample encodings supported by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Pcm24,
    Float32,
}

/// Header-level information about a WAV file, read without decoding samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub frames: u64,
}

impl WavInfo {
    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.sample_rate as f64
    }
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Error::Format {
            path: path.into(),
            reason: "truncated file".into(),
        },
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(reason) => Error::Format {
            path: path.into(),
            reason: reason.into(),
        },
        hound::Error::Unsupported => Error::Unsupported {
            path: path.into(),
            reason: "encoding not supported".into(),
        },
        other => Error::Format {
            path: path.into(),
            reason: other.to_string(),
        },
    }
}

fn track_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads only the header of a WAV file.
pub fn probe_wav(path: impl AsRef<Path>) -> Result<WavInfo> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    Ok(WavInfo {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        frames: reader.duration() as u64,
    })
}

/// Decodes a WAV file into a mono buffer, rejecting non-finite samples.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    load_wav_with(path, NonFinitePolicy::Reject)
}

/// Decodes a WAV file into a mono buffer.
///
/// Channels are averaged. Integer samples are divided by `2^(bits-1)`.
pub fn load_wav_with(path: impl AsRef<Path>, policy: NonFinitePolicy) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::Format {
            path: path.into(),
            reason: "zero channels".into(),
        });
    }
    if spec.sample_rate == 0 {
        return Err(Error::Format {
            path: path.into(),
            reason: "zero sample rate".into(),
        });
    }

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1u32 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| (v as f64 * scale) as f32))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (format, bits) => {
            return Err(Error::Unsupported {
                path: path.into(),
                reason: format!("{bits}-bit {format:?} samples"),
            })
        }
    };

    let channels = spec.channels as usize;
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(Error::EmptyInput(format!(
            "{} has no sample data",
            path.display()
        )));
    }

    let mut mono: Vec<f32> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| (frame.iter().map(|&s| s as f64).sum::<f64>() / channels as f64) as f32)
            .collect()
    };

    if let Some(pos) = mono.iter().position(|s| !s.is_finite()) {
        match policy {
            NonFinitePolicy::Reject => {
                return Err(Error::NonFinite(format!(
                    "{}: frame {pos} is not finite",
                    path.display()
                )))
            }
            NonFinitePolicy::Zero => mono.iter_mut().filter(|s| !s.is_finite()).for_each(|s| *s = 0.0),
        }
    }

    AudioBuffer::new(mono, spec.sample_rate, track_id_of(path))
}

/// Writes a mono buffer as a WAV file. Integer encodings round to nearest.
pub fn write_wav(path: impl AsRef<Path>, buf: &AudioBuffer, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, hound::SampleFormat::Int),
        WavEncoding::Pcm24 => (24, hound::SampleFormat::Int),
        WavEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: bits,
        sample_format: format,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    match encoding {
        WavEncoding::Float32 => {
            for &s in &buf.samples {
                writer.write_sample(s).map_err(|e| map_hound(path, e))?;
            }
        }
        WavEncoding::Pcm16 | WavEncoding::Pcm24 => {
            let full = (1i64 << (bits - 1)) as f64;
            let (lo, hi) = (-full, full - 1.0);
            for &s in &buf.samples {
                let v = (s as f64 * full).round().clamp(lo, hi) as i32;
                writer.write_sample(v).map_err(|e| map_hound(path, e))?;
            }
        }
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// Resamples with the default 64-tap kernel.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    resample_with_taps(buf, target_rate, DEFAULT_RESAMPLE_TAPS)
}

/// Band-limited resampling with a Hann-windowed sinc kernel of `taps` taps.
///
/// The output has `round(len * target / source)` samples. When downsampling
/// the kernel cutoff moves to the target Nyquist frequency.
pub fn resample_with_taps(buf: &AudioBuffer, target_rate: u32, taps: usize) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::Argument("target sample rate must be positive".into()));
    }
    if taps < 2 {
        return Err(Error::Argument("resampler needs at least 2 taps".into()));
    }
    if target_rate == buf.sample_rate {
        return Ok(buf.clone());
    }

    let ratio = target_rate as f64 / buf.sample_rate as f64;
    let out_len = ((buf.len() as f64 * ratio).round() as usize).max(1);
    let cutoff = ratio.min(1.0);
    let half = (taps / 2) as i64;
    let half_f = half as f64;
    let src = &buf.samples;
    let n_src = src.len() as i64;

    let out = (0..out_len)
        .map(|n| {
            let t = n as f64 / ratio;
            let center = t.floor() as i64;
            let mut acc = 0.0f64;
            for k in (center - half + 1)..=(center + half) {
                if k < 0 || k >= n_src {
                    continue;
                }
                let x = t - k as f64;
                if x.abs() >= half_f {
                    continue;
                }
                let window = 0.5 * (1.0 + (PI * x / half_f).cos());
                acc += src[k as usize] as f64 * cutoff * sinc(cutoff * x) * window;
            }
            acc.clamp(-1.0, 1.0) as f32
        })
        .collect();

    AudioBuffer::new(out, target_rate, buf.track_id.clone())
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Number of samples in one window of `window_seconds` at `sample_rate`.
pub fn window_len(window_seconds: f64, sample_rate: u32) -> usize {
    (window_seconds * sample_rate as f64).round() as usize
}

/// Splits a track into non-overlapping windows of `window_seconds`.
///
/// Produces `ceil(len / window_len)` windows; the last one is zero-padded.
pub fn window_track(buf: &AudioBuffer, window_seconds: f64) -> Result<Vec<AudioWindow>> {
    if !(window_seconds > 0.0) || !window_seconds.is_finite() {
        return Err(Error::Argument(format!(
            "window length must be positive, got {window_seconds}"
        )));
    }
    if buf.is_empty() {
        return Err(Error::EmptyInput("cannot window an empty buffer".into()));
    }
    let wlen = window_len(window_seconds, buf.sample_rate);
    if wlen == 0 {
        return Err(Error::Argument(format!(
            "{window_seconds} s is shorter than one sample"
        )));
    }

    Ok(buf
        .samples
        .chunks(wlen)
        .enumerate()
        .map(|(index, chunk)| {
            let mut samples = Vec::with_capacity(wlen);
            samples.extend_from_slice(chunk);
            samples.resize(wlen, 0.0);
            AudioWindow {
                parent_track_id: buf.track_id.clone(),
                window_index: index,
                samples,
                sample_rate: buf.sample_rate,
                start_time_s: index as f64 * window_seconds,
            }
        })
        .collect())
}
