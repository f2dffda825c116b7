use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Ok,
    SkippedShort,
    Error,
}

/// One manifest row. Motif and discord fields are empty unless a profile
/// was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackManifestEntry {
    pub track_id: String,
    pub species: String,
    /// Relative to the dataset root, `/`-separated.
    pub path: String,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub feature_kind: FeatureKind,
    pub motif_start_s: Option<f64>,
    pub motif_end_s: Option<f64>,
    pub motif_pair_start_s: Option<f64>,
    pub motif_distance: Option<f64>,
    pub discord_start_s: Option<f64>,
    pub discord_distance: Option<f64>,
    pub status: TrackStatus,
}

impl TrackManifestEntry {
    pub fn sort_key(&self) -> (&str, &str) {
        (&self.species, &self.track_id)
    }
}

/// Sorts by (species, track_id) and writes CSV with a header row.
pub fn write_manifest(path: impl AsRef<Path>, entries: &[TrackManifestEntry]) -> Result<()> {
    let mut sorted: Vec<&TrackManifestEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    if sorted.is_empty() {
        w.write_record(MANIFEST_COLUMNS)?;
    }
    for e in sorted {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const MANIFEST_COLUMNS: [&str; 13] = [
    "track_id",
    "species",
    "path",
    "duration_s",
    "sample_rate",
    "feature_kind",
    "motif_start_s",
    "motif_end_s",
    "motif_pair_start_s",
    "motif_distance",
    "discord_start_s",
    "discord_distance",
    "status",
];

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<TrackManifestEntry>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != MANIFEST_COLUMNS {
        return Err(Error::DataIntegrity(format!(
            "{}: unexpected manifest columns {header:?}",
            path.as_ref().display()
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(species: &str, id: &str, status: TrackStatus) -> TrackManifestEntry {
        let ok = status == TrackStatus::Ok;
        TrackManifestEntry {
            track_id: id.into(),
            species: species.into(),
            path: format!("{species}/{id}.wav"),
            duration_s: 28.78,
            sample_rate: 22050,
            feature_kind: FeatureKind::Cens,
            motif_start_s: ok.then_some(1.5),
            motif_end_s: ok.then_some(6.5),
            motif_pair_start_s: ok.then_some(12.0),
            motif_distance: ok.then_some(0.1 + 0.2),
            discord_start_s: ok.then_some(20.0),
            discord_distance: ok.then_some(3.25),
            status,
        }
    }

    #[test]
    fn round_trip_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.csv");
        let rows = vec![
            entry("skylar", "b", TrackStatus::Ok),
            entry("brnowl", "z, \"quoted\"", TrackStatus::Error),
            entry("skylar", "a", TrackStatus::SkippedShort),
        ];
        write_manifest(&p, &rows).unwrap();
        let back = read_manifest(&p).unwrap();
        let ids: Vec<&str> = back.iter().map(|e| e.track_id.as_str()).collect();
        assert_eq!(ids, ["z, \"quoted\"", "a", "b"]);
        assert_eq!(back[2], rows[0]);
        assert_eq!(back[1].motif_start_s, None);

        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(&MANIFEST_COLUMNS.join(",")));
        assert!(text.contains("skipped_short"));
    }

    #[test]
    fn empty_manifest_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_manifest(&p, &[]).unwrap();
        assert!(read_manifest(&p).unwrap().is_empty());
    }
}
