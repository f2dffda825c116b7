use std::path::{Path, PathBuf};

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::simple_mp::MatrixProfile;

pub const SPECTROGRAM_CSV: &str = "spectrogram.csv";
pub const PROFILE_CSV: &str = "profile.csv";

/// Writes `spectrogram.csv` (frame, bin, value) and, when a profile is
/// given, `profile.csv` (frame, distance, index) into `dir`.
///
/// Values use the shortest representation that parses back to the same
/// `f64`.
pub fn emit_plot_data(features: ArrayView2<'_, f64>, profile: Option<&MatrixProfile>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let spec_path = dir.join(SPECTROGRAM_CSV);
    let mut w = csv::Writer::from_path(&spec_path)?;
    w.write_record(["frame", "bin", "value"])?;
    for frame in 0..features.ncols() {
        for bin in 0..features.nrows() {
            w.write_record([frame.to_string(), bin.to_string(), features[[bin, frame]].to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(&spec_path, e))?;
    written.push(spec_path);

    if let Some(mp) = profile {
        let path = dir.join(PROFILE_CSV);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["frame", "distance", "index"])?;
        for (i, (d, j)) in mp.distances.iter().zip(&mp.indices).enumerate() {
            w.write_record([i.to_string(), d.to_string(), j.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
