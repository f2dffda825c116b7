use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{
    load_track, track_dir, TrackMeta, CONFIG_FILE, FEATURES_FILE, MANIFEST_FILE, META_FILE, PROFILE_FILE,
    PROFILE_INDEX_FILE,
};
use super::config::{LabelSource, PipelineConfig};
use super::manifest::{read_manifest, TrackManifestEntry, TrackStatus};
use super::plot::emit_plot_data;
use crate::audio_io::{window_len, window_track, AudioWindow};
use crate::error::{Error, Result};
use crate::features::{embedding_frame, EMBEDDING_SIZE};
use crate::join_features::{
    join_feature_vector, join_feature_vector_per_entry, sample_motif_library, MotifCandidate,
};
use crate::motifs::{frame_to_time, top_k_motifs};
use crate::npy::{self, Dtype};
use crate::simple_mp::{JoinKind, MatrixProfile};
use crate::triplets::{
    build_pairs, form_triplets, species_queue_batches, window_neighbors, AugmentConfig, Augmenter,
    TrackNeighbors, TripletRecord,
};

/// Arrays and metadata of one processed track, read back from disk.
#[derive(Debug, Clone)]
pub struct TrackArtifacts {
    pub meta: TrackMeta,
    pub features: Array2<f64>,
    pub profile: Option<MatrixProfile>,
}

/// A profile run directory: its resolved config and `ok` manifest rows.
#[derive(Debug, Clone)]
pub struct ProfileRun {
    pub dir: PathBuf,
    pub config: PipelineConfig,
    pub tracks: Vec<TrackManifestEntry>,
}

impl ProfileRun {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let config = PipelineConfig::from_path(dir.join(CONFIG_FILE))?;
        let mut tracks: Vec<TrackManifestEntry> = read_manifest(dir.join(MANIFEST_FILE))?
            .into_iter()
            .filter(|e| e.status == TrackStatus::Ok)
            .collect();
        tracks.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Self { dir, config, tracks })
    }

    pub fn load(&self, entry: &TrackManifestEntry) -> Result<TrackArtifacts> {
        load_track_artifacts(&track_dir(&self.dir, &entry.species, &entry.track_id))
    }
}

pub fn load_track_artifacts(dir: &Path) -> Result<TrackArtifacts> {
    let meta_path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: TrackMeta = serde_json::from_str(&text)?;
    let features = npy::read_file(dir.join(FEATURES_FILE))?.into_array2()?;
    if features.dim() != (meta.bins, meta.frames) {
        return Err(Error::DataIntegrity(format!(
            "{}: features are {:?}, metadata says ({}, {})",
            dir.display(),
            features.dim(),
            meta.bins,
            meta.frames
        )));
    }

    let profile_path = dir.join(PROFILE_FILE);
    let profile = if profile_path.exists() {
        let distances = npy::read_file(&profile_path)?.data;
        let raw_idx = npy::read_file(dir.join(PROFILE_INDEX_FILE))?.data;
        let n = meta.frames + 1 - meta.subsequence_len.min(meta.frames);
        if distances.len() != n || raw_idx.len() != n {
            return Err(Error::DataIntegrity(format!(
                "{}: profile length {} / index length {}, expected {n}",
                dir.display(),
                distances.len(),
                raw_idx.len()
            )));
        }
        let indices = raw_idx
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && (v as usize) < n {
                    Ok(v as usize)
                } else {
                    Err(Error::DataIntegrity(format!("{}: bad profile index {v}", dir.display())))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Some(MatrixProfile {
            distances,
            indices,
            subsequence_len: meta.subsequence_len,
            exclusion_radius: meta.exclusion_radius,
            join_kind: JoinKind::SelfJoin,
        })
    } else {
        None
    };
    Ok(TrackArtifacts {
        meta,
        features,
        profile,
    })
}

fn require_profile(a: &TrackArtifacts) -> Result<&MatrixProfile> {
    a.profile.as_ref().ok_or_else(|| {
        Error::DataIntegrity(format!(
            "track {} has no profile; run the profile stage first",
            a.meta.track_id
        ))
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifRow {
    pub track_id: String,
    pub species: String,
    pub rank: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub partner_start_s: f64,
    pub distance: f64,
}

/// Top-`k` motifs of every profiled track, written to `motifs.csv`.
pub fn export_motifs(run: &ProfileRun, k: usize, out: &Path) -> Result<Vec<MotifRow>> {
    create_dir(out)?;
    let mut rows = Vec::new();
    for entry in &run.tracks {
        let a = run.load(entry)?;
        let mp = require_profile(&a)?;
        let fr = a.meta.frame_rate;
        for (rank, m) in top_k_motifs(mp, k).into_iter().enumerate() {
            rows.push(MotifRow {
                track_id: entry.track_id.clone(),
                species: entry.species.clone(),
                rank,
                start_s: frame_to_time(m.position, fr),
                end_s: frame_to_time(m.position + mp.subsequence_len, fr),
                partner_start_s: frame_to_time(m.partner, fr),
                distance: m.distance,
            });
        }
    }
    let path = out.join("motifs.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

/// Spectrogram and profile CSVs for every track, under
/// `out/<species>/<track_id>/`.
pub fn export_plot_data(run: &ProfileRun, out: &Path) -> Result<usize> {
    for entry in &run.tracks {
        let a = run.load(entry)?;
        emit_plot_data(a.features.view(), a.profile.as_ref(), &out.join(&entry.species).join(&entry.track_id))?;
    }
    Ok(run.tracks.len())
}

/// How triplets are grouped into output batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletBatching {
    /// One triplet per pair, distant drawn from any other track, chunked
    /// into files of `batch_size`.
    Uniform,
    /// Species-queue mini-batches; distant always from another species.
    SpeciesQueue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletExportOptions {
    pub batch_size: usize,
    pub batching: TripletBatching,
    pub augment: Option<AugmentConfig>,
    pub seed: u64,
}

impl Default for TripletExportOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            batching: TripletBatching::Uniform,
            augment: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletExportSummary {
    pub pairs: usize,
    pub triplets: usize,
    pub degenerate: usize,
    pub batches: usize,
    pub dropped: usize,
}

#[derive(Serialize)]
struct TripletIndexRow<'a> {
    batch: usize,
    row: usize,
    anchor_track: &'a str,
    anchor_window: usize,
    neighbor_window: usize,
    distant_track: &'a str,
    distant_window: usize,
    species_anchor: &'a str,
    species_distant: &'a str,
    degenerate: bool,
}

/// Window-level neighbour lists for every profiled track.
pub fn track_neighbors(run: &ProfileRun) -> Result<Vec<TrackNeighbors>> {
    let ws = run.config.window_seconds;
    run.tracks
        .iter()
        .map(|entry| {
            let a = run.load(entry)?;
            let mp = require_profile(&a)?;
            let wlen = window_len(ws, a.meta.sample_rate);
            let n_windows = a.meta.n_samples.div_ceil(wlen);
            let neighbors = window_neighbors(&mp.indices, ws * a.meta.frame_rate, n_windows)?;
            Ok(TrackNeighbors {
                track_id: entry.track_id.clone(),
                species: entry.species.clone(),
                neighbors,
            })
        })
        .collect()
}

/// Builds triplets from a profile run and writes, per batch, three
/// `(n, 128, 128)` `<f4` arrays of embedding frames plus one JSON line
/// per triplet in `index.jsonl`.
///
/// Audio is re-read from `dataset_root` using the run's config.
pub fn export_triplets(
    dataset_root: &Path,
    run: &ProfileRun,
    opts: &TripletExportOptions,
    out: &Path,
) -> Result<TripletExportSummary> {
    if opts.batch_size == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    create_dir(out)?;
    let pairs = build_pairs(&track_neighbors(run)?)?;
    let (batches, dropped): (Vec<Vec<TripletRecord>>, usize) = match opts.batching {
        TripletBatching::Uniform => (
            form_triplets(&pairs, opts.seed)?
                .chunks(opts.batch_size)
                .map(<[TripletRecord]>::to_vec)
                .collect(),
            0,
        ),
        TripletBatching::SpeciesQueue => {
            let mut stream = species_queue_batches(pairs.iter().cloned(), opts.batch_size, opts.seed)?;
            let batches: Vec<_> = stream.by_ref().collect();
            (batches, stream.dropped())
        }
    };
    if dropped > 0 {
        warn!("{dropped} pairs left unbatched: fewer than two species remained");
    }

    let paths: HashMap<&str, &TrackManifestEntry> =
        run.tracks.iter().map(|e| (e.track_id.as_str(), e)).collect();
    let augmenter = opts.augment.map(Augmenter::new);
    let index_path = out.join("index.jsonl");
    let mut index = std::io::BufWriter::new(
        std::fs::File::create(&index_path).map_err(|e| Error::io(&index_path, e))?,
    );
    let mut summary = TripletExportSummary {
        pairs: pairs.len(),
        triplets: 0,
        degenerate: 0,
        batches: batches.len(),
        dropped,
    };

    for (b, batch) in batches.iter().enumerate() {
        let needed: BTreeSet<&str> = batch
            .iter()
            .flat_map(|t| [t.anchor.track_id.as_str(), t.distant.track_id.as_str()])
            .collect();
        let audio: HashMap<&str, Vec<AudioWindow>> = needed
            .into_par_iter()
            .map(|id| {
                let entry = paths.get(id).ok_or_else(|| {
                    Error::DataIntegrity(format!("triplet refers to unknown track {id}"))
                })?;
                let (buf, _) = load_track(&dataset_root.join(&entry.path), &run.config)?;
                Ok((id, window_track(&buf, run.config.window_seconds)?))
            })
            .collect::<Result<_>>()?;

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (b as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let jobs: Vec<(&str, usize, u64)> = batch
            .iter()
            .flat_map(|t| {
                [
                    (t.anchor.track_id.as_str(), t.anchor.window),
                    (t.neighbor.track_id.as_str(), t.neighbor.window),
                    (t.distant.track_id.as_str(), t.distant.window),
                ]
            })
            .map(|(id, w)| (id, w, rng.random::<u64>()))
            .collect();
        let frames: Vec<Array2<f64>> = jobs
            .par_iter()
            .map(|&(id, w, seed)| {
                let win = audio[id].get(w).ok_or_else(|| {
                    Error::DataIntegrity(format!("track {id} has no window {w}"))
                })?;
                match &augmenter {
                    Some(a) => embedding_frame(&a.augment(win, seed)),
                    None => embedding_frame(win),
                }
            })
            .collect::<Result<_>>()?;

        for (role, offset) in [("anchor", 0), ("neighbor", 1), ("distant", 2)] {
            let data: Vec<f64> = frames
                .iter()
                .skip(offset)
                .step_by(3)
                .flat_map(|f| f.iter().copied())
                .collect();
            npy::write_file(
                out.join(format!("batch_{b:05}_{role}.npy")),
                Dtype::F4,
                &[batch.len(), EMBEDDING_SIZE, EMBEDDING_SIZE],
                &data,
            )?;
        }
        for (row, t) in batch.iter().enumerate() {
            let line = serde_json::to_string(&TripletIndexRow {
                batch: b,
                row,
                anchor_track: &t.anchor.track_id,
                anchor_window: t.anchor.window,
                neighbor_window: t.neighbor.window,
                distant_track: &t.distant.track_id,
                distant_window: t.distant.window,
                species_anchor: &t.anchor_species,
                species_distant: &t.distant_species,
                degenerate: t.degenerate,
            })?;
            writeln!(index, "{line}").map_err(|e| Error::io(&index_path, e))?;
        }
        summary.triplets += batch.len();
        summary.degenerate += batch.iter().filter(|t| t.degenerate).count();
        info!("batch {b}: {} triplets", batch.len());
    }
    index.flush().map_err(|e| Error::io(&index_path, e))?;

    let summary_path = out.join("triplets.json");
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    std::fs::write(&summary_path, json).map_err(|e| Error::io(&summary_path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinExportOptions {
    pub library_size: usize,
    pub per_entry: bool,
    pub seed: u64,
}

impl Default for JoinExportOptions {
    fn default() -> Self {
        Self {
            library_size: 64,
            per_entry: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinFeatureRows {
    pub keys: Vec<(String, usize)>,
    pub values: Array2<f64>,
}

/// Frame span `[start, start + len)` of window `w`. Windows shorter than
/// `m` frames are widened to `m`, and spans past the end are shifted back.
pub fn window_frame_span(w: usize, frames_per_window: f64, m: usize, frames: usize) -> (usize, usize) {
    let len = (frames_per_window.round() as usize).max(m).min(frames);
    let start = ((w as f64 * frames_per_window).floor() as usize).min(frames - len);
    (start, len)
}

/// Library patch of one track at its motif or discord position.
fn candidate(a: &TrackArtifacts, label: LabelSource) -> Result<MotifCandidate> {
    let motif = a.meta.motif.ok_or_else(|| {
        Error::DataIntegrity(format!("track {} has no motif metadata", a.meta.track_id))
    })?;
    let start = match label {
        LabelSource::Motif => motif.motif_a,
        LabelSource::Discord => motif.discord,
    };
    let m = a.meta.subsequence_len;
    Ok(MotifCandidate {
        track_id: a.meta.track_id.clone(),
        species: a.meta.species.clone(),
        patch: a.features.slice(s![.., start..start + m]).to_owned(),
    })
}

/// Samples a motif library from the run's tracks and joins every window
/// of every track against it. Writes `join_features.npy`,
/// `join_features.csv` and `library.json`.
pub fn export_join_features(run: &ProfileRun, opts: &JoinExportOptions, out: &Path) -> Result<JoinFeatureRows> {
    create_dir(out)?;
    let label = run.config.label_source;
    let tracks: Vec<TrackArtifacts> = run.tracks.iter().map(|e| run.load(e)).collect::<Result<_>>()?;
    let candidates: Vec<MotifCandidate> = tracks.iter().map(|a| candidate(a, label)).collect::<Result<_>>()?;
    let library = sample_motif_library(&candidates, opts.library_size, opts.seed)?;
    let m = run.config.subsequence_len();
    let ws = run.config.window_seconds;

    let jobs: Vec<(&TrackArtifacts, usize)> = tracks
        .iter()
        .flat_map(|a| {
            let n_windows = a.meta.n_samples.div_ceil(window_len(ws, a.meta.sample_rate));
            (0..n_windows).map(move |w| (a, w))
        })
        .collect();
    let width = if opts.per_entry { 3 * library.size() } else { 3 };
    let vectors: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(a, w)| {
            let (start, len) = window_frame_span(w, ws * a.meta.frame_rate, m, a.meta.frames);
            let view = a.features.slice(s![.., start..start + len]);
            if opts.per_entry {
                join_feature_vector_per_entry(view, &library, m)
            } else {
                join_feature_vector(view, &library, m).map(|v| v.to_vec())
            }
        })
        .collect::<Result<_>>()?;

    let values = Array2::from_shape_vec((vectors.len(), width), vectors.into_iter().flatten().collect())
        .expect("every vector has the same width");
    npy::write_array2(out.join("join_features.npy"), Dtype::F8, &values)?;

    let keys: Vec<(String, usize)> = jobs.iter().map(|(a, w)| (a.meta.track_id.clone(), *w)).collect();
    let csv_path = out.join("join_features.csv");
    let mut wtr = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["track_id".to_string(), "window_index".to_string()];
    if opts.per_entry {
        for e in 0..library.size() {
            header.extend(["min", "median", "max"].map(|s| format!("e{e}_{s}")));
        }
    } else {
        header.extend(["f_min", "f_median", "f_max"].map(String::from));
    }
    wtr.write_record(&header)?;
    for ((id, w), row) in keys.iter().zip(values.rows()) {
        let mut rec = vec![id.clone(), w.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io(&csv_path, e))?;

    let lib_meta: Vec<BTreeMap<&str, &str>> = library
        .entries
        .iter()
        .map(|e| BTreeMap::from([("track_id", e.track_id.as_str()), ("species", e.species.as_str())]))
        .collect();
    let lib_path = out.join("library.json");
    let mut json = serde_json::to_string_pretty(&serde_json::json!({
        "seed": library.seed,
        "label_source": label,
        "subsequence_len": m,
        "entries": lib_meta,
    }))?;
    json.push('\n');
    std::fs::write(&lib_path, json).map_err(|e| Error::io(&lib_path, e))?;
    Ok(JoinFeatureRows { keys, values })
}
