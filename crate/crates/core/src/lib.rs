//! Unsupervised bird-audio toolkit: spectrogram features, SiMPle
//! matrix-profile joins, motif/discord mining, triplet dataset generation
//! and matrix-profile join features, plus the batch pipeline that persists
//! them as NPY/CSV/JSON artifacts.

pub mod audio_io;
pub mod error;
pub mod features;
mod fft;
pub mod join_features;
pub mod motifs;
pub mod npy;
pub mod pipeline;
pub mod simple_mp;
pub mod triplets;

pub use audio_io::{AudioBuffer, AudioWindow};
pub use error::{Error, Result};
pub use features::{FeatureKind, Spectrogram, SpectrogramParams};
pub use motifs::{Motif, MotifResult};
pub use pipeline::{PipelineConfig, TrackManifestEntry};
pub use simple_mp::{JoinKind, JoinOptions, MatrixProfile};
pub use triplets::{TripletRecord, WindowPair};
