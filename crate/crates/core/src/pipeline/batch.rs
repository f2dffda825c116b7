use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::config::PipelineConfig;
use super::manifest::{write_manifest, TrackManifestEntry, TrackStatus};
use crate::audio_io::{load_wav_with, probe_wav, resample_with_taps, AudioBuffer};
use crate::error::{Error, Result};
use crate::features::{cens_chromagram, mel_spectrogram, stft_magnitude, FeatureKind, Spectrogram};
use crate::motifs::{frame_to_time, MotifResult};
use crate::npy::{self, Dtype};
use crate::simple_mp::{self_join_with, JoinOptions, MatrixProfile};

pub const REPORT_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const REPORT_FILE: &str = "run_report.json";
pub const CONFIG_FILE: &str = "config.json";
pub const FEATURES_FILE: &str = "features.npy";
pub const PROFILE_FILE: &str = "profile.npy";
pub const PROFILE_INDEX_FILE: &str = "profile_index.npy";
pub const META_FILE: &str = "meta.json";

/// An audio file found under the dataset root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScannedTrack {
    pub species: String,
    pub track_id: String,
    pub path: PathBuf,
    /// Relative to the root, `/`-separated.
    pub rel_path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetScan {
    pub tracks: Vec<ScannedTrack>,
    pub non_audio_skipped: usize,
}

fn is_audio(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Walks `root` for `.wav` files; species is the parent directory name.
/// Tracks come back ordered by relative path.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetScan> {
    let root = root.as_ref();
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "dataset root is not a directory"),
        ));
    }

    let mut scan = DatasetScan::default();
    for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        if !is_audio(path) {
            scan.non_audio_skipped += 1;
            continue;
        }
        let rel = path.strip_prefix(root).unwrap_or(path);
        let species = path
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let track_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        scan.tracks.push(ScannedTrack {
            species,
            track_id,
            path: path.to_path_buf(),
            rel_path: rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/"),
        });
    }
    scan.tracks.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    if scan.non_audio_skipped > 0 {
        warn!("{}: skipped {} non-audio files", root.display(), scan.non_audio_skipped);
    }
    if scan.tracks.is_empty() {
        warn!("{}: no audio files found", root.display());
    }
    Ok(scan)
}

/// What a run computes per track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Features only.
    Features,
    /// Features and self-join profile.
    #[default]
    Profile,
}

/// Per-track metadata persisted next to the arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub track_id: String,
    pub species: String,
    pub path: String,
    pub feature_kind: FeatureKind,
    pub source_sample_rate: u32,
    pub sample_rate: u32,
    pub n_samples: usize,
    pub duration_s: f64,
    pub frame_rate: f64,
    pub bins: usize,
    pub frames: usize,
    pub subsequence_len: usize,
    pub exclusion_radius: usize,
    pub motif: Option<MotifResult>,
}

/// Directory holding one track's artifacts.
pub fn track_dir(out: &Path, species: &str, track_id: &str) -> PathBuf {
    out.join("tracks").join(species).join(track_id)
}

pub(crate) const STAGES: [&str; 5] = ["decode", "resample", "features", "join", "write"];

#[derive(Debug, Clone, Default)]
pub struct StageTimes(pub [Option<Duration>; 5]);

/// Result of processing one track.
#[derive(Debug, Clone)]
pub struct TrackOutcome {
    pub entry: TrackManifestEntry,
    pub timings: StageTimes,
    pub error: Option<String>,
}

/// Decodes a file and brings it to the configured sample rate.
pub fn load_track(path: &Path, config: &PipelineConfig) -> Result<(AudioBuffer, u32)> {
    let raw = load_wav_with(path, config.non_finite)?;
    let source_rate = raw.sample_rate();
    Ok((resample_with_taps(&raw, config.params.sample_rate, config.resample_taps)?, source_rate))
}

pub fn compute_features(buf: &AudioBuffer, config: &PipelineConfig) -> Result<Spectrogram> {
    match config.feature_kind {
        FeatureKind::Mel => mel_spectrogram(buf, &config.params),
        FeatureKind::Cens => cens_chromagram(buf, config.params.target_fps),
        FeatureKind::Linear => stft_magnitude(buf, config.params.n_fft, config.params.hop),
    }
}

fn timed<T>(slot: &mut Option<Duration>, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = Some(start.elapsed());
    out
}

/// Processes one track and writes its artifacts under `out`.
///
/// Failures are reported through the outcome's status, never as `Err`.
/// Tracks too short for a self-join are `skipped_short` and write nothing.
pub fn process_track(track: &ScannedTrack, config: &PipelineConfig, mode: RunMode, out: &Path) -> TrackOutcome {
    let mut timings = StageTimes::default();
    let mut entry = TrackManifestEntry {
        track_id: track.track_id.clone(),
        species: track.species.clone(),
        path: track.rel_path.clone(),
        duration_s: 0.0,
        sample_rate: config.params.sample_rate,
        feature_kind: config.feature_kind,
        motif_start_s: None,
        motif_end_s: None,
        motif_pair_start_s: None,
        motif_distance: None,
        discord_start_s: None,
        discord_distance: None,
        status: TrackStatus::Error,
    };
    match process_inner(track, config, mode, out, &mut entry, &mut timings) {
        Ok(()) => TrackOutcome {
            entry,
            timings,
            error: None,
        },
        Err(e) => {
            warn!("{}: {e}", track.rel_path);
            entry.status = TrackStatus::Error;
            TrackOutcome {
                entry,
                timings,
                error: Some(e.to_string()),
            }
        }
    }
}

fn process_inner(
    track: &ScannedTrack,
    config: &PipelineConfig,
    mode: RunMode,
    out: &Path,
    entry: &mut TrackManifestEntry,
    timings: &mut StageTimes,
) -> Result<()> {
    let [t_decode, t_resample, t_features, t_join, t_write] = &mut timings.0;
    let raw = timed(t_decode, || load_wav_with(&track.path, config.non_finite))?;
    entry.duration_s = raw.duration_s();
    let source_sample_rate = raw.sample_rate();
    let buf = timed(t_resample, || {
        resample_with_taps(&raw, config.params.sample_rate, config.resample_taps)
    })?;
    drop(raw);
    let spec = timed(t_features, || compute_features(&buf, config))?;

    let m = config.subsequence_len();
    let r = config.exclusion();
    let mut profile: Option<(MatrixProfile, MotifResult)> = None;
    if mode == RunMode::Profile {
        if spec.frames() < m + r + 1 {
            entry.status = TrackStatus::SkippedShort;
            return Ok(());
        }
        let mp = timed(t_join, || self_join_with(&spec, m, r, JoinOptions::sequential()))?;
        let motif = MotifResult::from_profile(&mp)?;
        let fr = spec.frame_rate;
        entry.motif_start_s = Some(frame_to_time(motif.motif_a, fr));
        entry.motif_end_s = Some(frame_to_time(motif.motif_a + m, fr));
        entry.motif_pair_start_s = Some(frame_to_time(motif.motif_b, fr));
        entry.motif_distance = Some(motif.motif_distance);
        entry.discord_start_s = Some(frame_to_time(motif.discord, fr));
        entry.discord_distance = Some(motif.discord_distance);
        profile = Some((mp, motif));
    }

    let meta = TrackMeta {
        track_id: track.track_id.clone(),
        species: track.species.clone(),
        path: track.rel_path.clone(),
        feature_kind: config.feature_kind,
        source_sample_rate,
        sample_rate: buf.sample_rate(),
        n_samples: buf.len(),
        duration_s: entry.duration_s,
        frame_rate: spec.frame_rate,
        bins: spec.bins(),
        frames: spec.frames(),
        subsequence_len: m,
        exclusion_radius: r,
        motif: profile.as_ref().map(|(_, motif)| *motif),
    };
    timed(t_write, || write_track_artifacts(out, &meta, &spec, profile.as_ref().map(|(mp, _)| mp)))?;
    entry.status = TrackStatus::Ok;
    Ok(())
}

fn write_track_artifacts(out: &Path, meta: &TrackMeta, spec: &Spectrogram, mp: Option<&MatrixProfile>) -> Result<()> {
    let dir = track_dir(out, &meta.species, &meta.track_id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    npy::write_array2(dir.join(FEATURES_FILE), Dtype::F8, &spec.data)?;
    if let Some(mp) = mp {
        npy::write_file(dir.join(PROFILE_FILE), Dtype::F8, &[mp.len()], &mp.distances)?;
        let idx: Vec<f64> = mp.indices.iter().map(|&i| i as f64).collect();
        npy::write_file(dir.join(PROFILE_INDEX_FILE), Dtype::F8, &[idx.len()], &idx)?;
    }
    let meta_path = dir.join(META_FILE);
    let mut json = serde_json::to_string_pretty(meta)?;
    json.push('\n');
    std::fs::write(&meta_path, json).map_err(|e| Error::io(&meta_path, e))
}

/// Counters over every file under the root; they sum to `scanned`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub scanned: usize,
    pub ok: usize,
    pub skipped_short: usize,
    pub error: usize,
    pub non_audio_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBucket {
    /// Upper bound in milliseconds; `None` is the overflow bucket.
    pub le_ms: Option<u64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageHistogram {
    pub count: usize,
    pub total_s: f64,
    pub max_s: f64,
    pub buckets: Vec<HistogramBucket>,
}

const BUCKET_BOUNDS_MS: [u64; 13] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000];

impl StageHistogram {
    fn from_durations(samples: &[Duration]) -> Self {
        let mut buckets: Vec<HistogramBucket> = BUCKET_BOUNDS_MS
            .iter()
            .map(|&b| HistogramBucket {
                le_ms: Some(b),
                count: 0,
            })
            .chain(std::iter::once(HistogramBucket { le_ms: None, count: 0 }))
            .collect();
        for d in samples {
            let ms = d.as_secs_f64() * 1e3;
            let slot = BUCKET_BOUNDS_MS
                .iter()
                .position(|&b| ms <= b as f64)
                .unwrap_or(BUCKET_BOUNDS_MS.len());
            buckets[slot].count += 1;
        }
        Self {
            count: samples.len(),
            total_s: samples.iter().map(Duration::as_secs_f64).sum(),
            max_s: samples.iter().map(Duration::as_secs_f64).fold(0.0, f64::max),
            buckets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub track_id: String,
    pub species: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackError {
    pub track_id: String,
    pub path: String,
    pub message: String,
}

/// Summary written as `run_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub mode: RunMode,
    pub workers: usize,
    pub counts: RunCounts,
    pub wall_time_s: f64,
    pub stage_timings: BTreeMap<String, StageHistogram>,
    /// Tracks in the order they were handed to workers (longest first).
    pub dispatch_order: Vec<DispatchRecord>,
    pub errors: Vec<TrackError>,
    #[serde(skip)]
    pub manifest: Vec<TrackManifestEntry>,
}

/// Scans `root`, processes every track on `config.workers` threads and
/// writes the manifest, run report and resolved config into `out`.
///
/// Per-track failures are recorded, not returned; `Err` means the run
/// itself could not proceed (unreadable root, unwritable output).
pub fn run_batch(root: impl AsRef<Path>, config: &PipelineConfig, mode: RunMode, out: impl AsRef<Path>) -> Result<RunReport> {
    let started = Instant::now();
    let (root, out) = (root.as_ref(), out.as_ref());
    config.validate()?;
    let scan = scan_dataset(root)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let config_path = out.join(CONFIG_FILE);
    let mut cfg_json = config.to_json()?;
    cfg_json.push('\n');
    std::fs::write(&config_path, cfg_json).map_err(|e| Error::io(&config_path, e))?;

    // Longest first; unreadable headers sort last and fail in process_track.
    let mut queue: Vec<(f64, &ScannedTrack)> = scan
        .tracks
        .iter()
        .map(|t| (probe_wav(&t.path).map_or(0.0, |i| i.duration_s()), t))
        .collect();
    queue.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.rel_path.cmp(&b.1.rel_path)));

    let workers = config.workers.min(queue.len()).max(1);
    info!("processing {} tracks on {workers} workers", queue.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<TrackOutcome>>> = Mutex::new(vec![None; queue.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, track)) = queue.get(i) else { break };
                let outcome = process_track(track, config, mode, out);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(outcome);
            });
        }
    });
    let outcomes: Vec<TrackOutcome> = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|o| o.expect("every queued track is processed"))
        .collect();

    let mut counts = RunCounts {
        scanned: scan.tracks.len() + scan.non_audio_skipped,
        non_audio_skipped: scan.non_audio_skipped,
        ..Default::default()
    };
    let mut per_stage: Vec<Vec<Duration>> = vec![Vec::new(); STAGES.len()];
    let mut errors = Vec::new();
    for o in &outcomes {
        match o.entry.status {
            TrackStatus::Ok => counts.ok += 1,
            TrackStatus::SkippedShort => counts.skipped_short += 1,
            TrackStatus::Error => counts.error += 1,
        }
        for (slot, t) in per_stage.iter_mut().zip(&o.timings.0) {
            slot.extend(*t);
        }
        if let Some(msg) = &o.error {
            errors.push(TrackError {
                track_id: o.entry.track_id.clone(),
                path: o.entry.path.clone(),
                message: msg.clone(),
            });
        }
    }
    errors.sort_by(|a, b| a.path.cmp(&b.path));

    let manifest: Vec<TrackManifestEntry> = outcomes.into_iter().map(|o| o.entry).collect();
    write_manifest(out.join(MANIFEST_FILE), &manifest)?;
    let mut manifest = manifest;
    manifest.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let report = RunReport {
        schema: REPORT_SCHEMA,
        mode,
        workers,
        counts,
        wall_time_s: started.elapsed().as_secs_f64(),
        stage_timings: STAGES
            .iter()
            .zip(&per_stage)
            .map(|(name, d)| (name.to_string(), StageHistogram::from_durations(d)))
            .collect(),
        dispatch_order: queue
            .iter()
            .map(|(d, t)| DispatchRecord {
                track_id: t.track_id.clone(),
                species: t.species.clone(),
                duration_s: *d,
            })
            .collect(),
        errors,
        manifest,
    };
    let report_path = out.join(REPORT_FILE);
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(&report_path, json).map_err(|e| Error::io(&report_path, e))?;
    info!(
        "done in {:.2} s: {} ok, {} short, {} errors",
        report.wall_time_s, counts.ok, counts.skipped_short, counts.error
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio_io::{write_wav, WavEncoding};

    fn tone(path: &Path, seconds: f64, freq: f64, rate: u32) {
        let n = (seconds * rate as f64) as usize;
        let samples = (0..n)
            .map(|i| (0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin()) as f32)
            .collect();
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        write_wav(path, &AudioBuffer::new(samples, rate, "t").unwrap(), WavEncoding::Pcm16).unwrap();
    }

    #[test]
    fn scan_layout() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        tone(&root.join("skylar/a.wav"), 0.1, 440.0, 8000);
        tone(&root.join("brnowl/b.WAV"), 0.1, 440.0, 8000);
        std::fs::write(root.join("brnowl/notes.txt"), "x").unwrap();
        std::fs::create_dir_all(root.join("skylar/deep")).unwrap();
        std::fs::write(root.join("skylar/deep/readme.md"), "x").unwrap();

        let scan = scan_dataset(root).unwrap();
        let got: Vec<(&str, &str, &str)> = scan
            .tracks
            .iter()
            .map(|t| (t.species.as_str(), t.track_id.as_str(), t.rel_path.as_str()))
            .collect();
        assert_eq!(got, [("brnowl", "b", "brnowl/b.WAV"), ("skylar", "a", "skylar/a.wav")]);
        assert_eq!(scan.non_audio_skipped, 2);
    }

    #[test]
    fn scan_empty_and_missing() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(scan_dataset(dir.path()).unwrap(), DatasetScan::default());
        assert!(matches!(scan_dataset(dir.path().join("nope")), Err(Error::Io { .. })));
    }

    #[test]
    fn short_track_is_skipped_without_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in/sp/short.wav");
        tone(&path, 3.0, 440.0, 22050);
        let track = scan_dataset(dir.path().join("in")).unwrap().tracks.remove(0);
        let out = dir.path().join("out");
        let cfg = PipelineConfig {
            workers: 1,
            ..Default::default()
        };
        let o = process_track(&track, &cfg, RunMode::Profile, &out);
        assert_eq!(o.entry.status, TrackStatus::SkippedShort);
        assert!(!track_dir(&out, "sp", "short").exists());

        // features-only mode has no length requirement beyond the STFT
        let o = process_track(&track, &cfg, RunMode::Features, &out);
        assert_eq!(o.entry.status, TrackStatus::Ok);
        assert!(track_dir(&out, "sp", "short").join(FEATURES_FILE).exists());
        assert!(!track_dir(&out, "sp", "short").join(PROFILE_FILE).exists());
    }

    #[test]
    fn corrupt_file_is_an_error_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sp/bad.wav");
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(&p, b"RIFF....WAVEjunk").unwrap();
        let track = scan_dataset(dir.path()).unwrap().tracks.remove(0);
        let o = process_track(&track, &PipelineConfig::default(), RunMode::Profile, &dir.path().join("out"));
        assert_eq!(o.entry.status, TrackStatus::Error);
        assert!(o.error.is_some());
    }

    #[test]
    fn histogram_buckets() {
        let h = StageHistogram::from_durations(&[
            Duration::from_micros(500),
            Duration::from_millis(3),
            Duration::from_secs(20),
        ]);
        assert_eq!(h.count, 3);
        assert_eq!(h.buckets[0].count, 1);
        assert_eq!(h.buckets[2].count, 1);
        assert_eq!(h.buckets.last().unwrap().count, 1);
        assert_eq!(h.max_s, 20.0);
    }
}
