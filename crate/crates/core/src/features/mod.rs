//! Spectrogram front-ends: linear STFT magnitude, dB-scaled Mel, CENS chroma
//! and the fixed 128x128 embedding frame.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod chroma;
mod mel;
mod stft;

pub use chroma::{cens_analysis_hop, cens_chromagram, CHROMA_FMIN_HZ, CHROMA_HOP, CHROMA_N_FFT, CENS_SMOOTH_LEN};
pub use mel::{
    embedding_frame, mel_filterbank, mel_power, mel_spectrogram, power_to_db, EMBEDDING_SIZE,
    EMBEDDING_N_FFT, DB_FLOOR_AMIN, DB_TOP_RANGE,
};
pub use stft::{frame_count, stft_magnitude};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mel,
    #[default]
    Cens,
    Linear,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Mel => "mel",
            FeatureKind::Cens => "cens",
            FeatureKind::Linear => "linear",
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mel" => Ok(FeatureKind::Mel),
            "cens" => Ok(FeatureKind::Cens),
            "linear" => Ok(FeatureKind::Linear),
            other => Err(Error::Argument(format!("unknown feature kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    #[default]
    Hann,
}

/// Parameters shared by the STFT-based front-ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramParams {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub target_fps: u32,
    pub sample_rate: u32,
    pub window_fn: WindowFn,
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 80,
            n_mels: 16,
            target_fps: 10,
            sample_rate: 22050,
            window_fn: WindowFn::Hann,
        }
    }
}

impl SpectrogramParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.n_fft < self.hop {
            return Err(Error::Argument(format!(
                "need n_fft >= hop >= 1, got n_fft={} hop={}",
                self.n_fft, self.hop
            )));
        }
        if !self.n_fft.is_power_of_two() {
            return Err(Error::Argument(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        if self.n_mels == 0 {
            return Err(Error::Argument("n_mels must be at least 1".into()));
        }
        if self.target_fps == 0 {
            return Err(Error::Argument("target_fps must be at least 1".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::Argument("sample_rate must be positive".into()));
        }
        Ok(())
    }
}

/// A (bins x frames) feature matrix with its frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub data: Array2<f64>,
    pub frame_rate: f64,
    pub kind: FeatureKind,
    pub params: SpectrogramParams,
}

impl Spectrogram {
    /// Wraps an arbitrary matrix, checking that it is non-empty and finite.
    pub fn new(
        data: Array2<f64>,
        frame_rate: f64,
        kind: FeatureKind,
        params: SpectrogramParams,
    ) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::EmptyInput("spectrogram has no frames or bins".into()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("spectrogram contains NaN/Inf".into()));
        }
        Ok(Self {
            data,
            frame_rate,
            kind,
            params,
        })
    }

    /// Matrix-only spectrogram; handy for synthetic data and tests.
    pub fn from_matrix(data: Array2<f64>) -> Result<Self> {
        Self::new(data, 1.0, FeatureKind::Linear, SpectrogramParams::default())
    }

    pub fn bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.bins(), self.frames())
    }
}

pub(crate) fn require_power_of_two(n_fft: usize) -> Result<()> {
    if n_fft < 2 || !n_fft.is_power_of_two() {
        return Err(Error::Argument(format!(
            "n_fft must be a power of two >= 2, got {n_fft}"
        )));
    }
    Ok(())
}
