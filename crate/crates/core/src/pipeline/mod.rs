//! Batch orchestration over a `<root>/<species>/<track>.wav` dataset:
//! features and self-joins per track, persisted as NPY/JSON, with a CSV
//! manifest and a JSON run report.

mod batch;
mod config;
mod export;
mod manifest;
mod plot;

pub use batch::{
    compute_features, load_track, process_track, run_batch, scan_dataset, track_dir, DatasetScan, DispatchRecord,
    HistogramBucket, RunCounts, RunMode, RunReport, ScannedTrack, StageHistogram, TrackError, TrackMeta,
    TrackOutcome, CONFIG_FILE, FEATURES_FILE, MANIFEST_FILE, META_FILE, PROFILE_FILE, PROFILE_INDEX_FILE,
    REPORT_FILE, REPORT_SCHEMA,
};
pub use config::{LabelSource, PipelineConfig};
pub use export::{
    export_join_features, export_motifs, export_plot_data, export_triplets, load_track_artifacts, track_neighbors,
    window_frame_span, JoinExportOptions, JoinFeatureRows, MotifRow, ProfileRun, TrackArtifacts, TripletBatching,
    TripletExportOptions, TripletExportSummary,
};
pub use manifest::{read_manifest, write_manifest, TrackManifestEntry, TrackStatus, MANIFEST_COLUMNS};
pub use plot::{emit_plot_data, PROFILE_CSV, SPECTROGRAM_CSV};
