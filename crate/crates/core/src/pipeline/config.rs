use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io::{NonFinitePolicy, DEFAULT_RESAMPLE_TAPS};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, SpectrogramParams};
use crate::simple_mp::default_exclusion_radius;

/// Which profile extreme labels a track: the motif (minimum) or the
/// discord (maximum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    #[default]
    Motif,
    Discord,
}

impl std::str::FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "motif" => Ok(LabelSource::Motif),
            "discord" => Ok(LabelSource::Discord),
            other => Err(Error::Argument(format!("unknown label source {other:?}"))),
        }
    }
}

/// Everything that determines the artifacts of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub feature_kind: FeatureKind,
    pub params: SpectrogramParams,
    /// SiMPle subsequence length in frames; 50 for CENS, 400 for Mel when unset.
    pub simple_window: Option<usize>,
    /// Self-join exclusion radius in frames; `simple_window / 2` when unset.
    pub exclusion_radius: Option<usize>,
    pub workers: usize,
    pub seed: u64,
    pub label_source: LabelSource,
    pub window_seconds: f64,
    pub non_finite: NonFinitePolicy,
    pub resample_taps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            feature_kind: FeatureKind::Cens,
            params: SpectrogramParams::default(),
            simple_window: None,
            exclusion_radius: None,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
            label_source: LabelSource::Motif,
            window_seconds: 5.0,
            non_finite: NonFinitePolicy::Reject,
            resample_taps: DEFAULT_RESAMPLE_TAPS,
        }
    }
}

impl PipelineConfig {
    /// Loads a TOML or JSON file, chosen by extension (`.json` is JSON,
    /// anything else TOML).
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn subsequence_len(&self) -> usize {
        self.simple_window.unwrap_or(match self.feature_kind {
            FeatureKind::Mel => 400,
            FeatureKind::Cens | FeatureKind::Linear => 50,
        })
    }

    pub fn exclusion(&self) -> usize {
        self.exclusion_radius
            .unwrap_or_else(|| default_exclusion_radius(self.subsequence_len()))
    }

    /// Same config with defaults filled in, as persisted next to outputs.
    pub fn resolved(&self) -> Self {
        Self {
            simple_window: Some(self.subsequence_len()),
            exclusion_radius: Some(self.exclusion()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.subsequence_len() < 2 {
            return Err(Error::Config("simple_window must be at least 2".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return Err(Error::Config("window_seconds must be positive".into()));
        }
        if self.resample_taps < 2 {
            return Err(Error::Config("resample_taps must be at least 2".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.resolved())?)
    }
}
