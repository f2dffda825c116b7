//! Matrix-profile join features: a window is AB-joined against a library of
//! sampled motif patches and summarized by the profile's min/median/max.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simple_mp::{ab_join_matrix, JoinOptions};

/// A motif patch available for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifCandidate {
    pub track_id: String,
    pub species: String,
    pub patch: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotifLibrary {
    pub entries: Vec<MotifCandidate>,
    pub seed: u64,
}

impl MotifLibrary {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    /// Bin count and patch length shared by every entry.
    pub fn patch_shape(&self) -> Option<(usize, usize)> {
        self.entries.first().map(|e| e.patch.dim())
    }
}

/// Uniform sample of `k` candidates without replacement, in draw order.
pub fn sample_motif_library(candidates: &[MotifCandidate], k: usize, rng_seed: u64) -> Result<MotifLibrary> {
    if k == 0 {
        return Err(Error::Argument("library size must be at least 1".into()));
    }
    if candidates.len() < k {
        return Err(Error::Size(format!(
            "need {k} motifs, only {} available",
            candidates.len()
        )));
    }
    let shape = candidates[0].patch.dim();
    if let Some(bad) = candidates.iter().find(|c| c.patch.dim() != shape) {
        return Err(Error::Shape(format!(
            "motif patch of {} is {:?}, expected {shape:?}",
            bad.track_id,
            bad.patch.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let entries = sample(&mut rng, candidates.len(), k)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect();
    Ok(MotifLibrary { entries, seed: rng_seed })
}

/// Profile of `window` where each position takes its nearest match over all
/// library entries; subsequences never span two entries.
pub fn library_profile(window: ArrayView2<'_, f64>, library: &MotifLibrary, m: usize) -> Result<Vec<f64>> {
    Ok(per_entry_profiles(window, library, m)?
        .into_iter()
        .reduce(|mut acc, p| {
            acc.iter_mut().zip(p).for_each(|(a, d)| *a = a.min(d));
            acc
        })
        .expect("library is non-empty"))
}

fn per_entry_profiles(window: ArrayView2<'_, f64>, library: &MotifLibrary, m: usize) -> Result<Vec<Vec<f64>>> {
    if library.entries.is_empty() {
        return Err(Error::Size("motif library is empty".into()));
    }
    if window.ncols() < m {
        return Err(Error::Size(format!(
            "window has {} frames, fewer than m={m}",
            window.ncols()
        )));
    }
    library
        .entries
        .iter()
        .map(|e| Ok(ab_join_matrix(window, e.patch.view(), m, JoinOptions::sequential())?.distances))
        .collect()
}

/// `[min, median, max]` with the lower-middle median.
pub fn summarize(profile: &[f64]) -> [f64; 3] {
    let mut sorted = profile.to_vec();
    sorted.sort_by(f64::total_cmp);
    [sorted[0], sorted[(sorted.len() - 1) / 2], sorted[sorted.len() - 1]]
}

/// The 3-component join feature of one window.
pub fn join_feature_vector(window: ArrayView2<'_, f64>, library: &MotifLibrary, m: usize) -> Result<[f64; 3]> {
    Ok(summarize(&library_profile(window, library, m)?))
}

/// `[min, median, max]` for each library entry separately, entry-major.
pub fn join_feature_vector_per_entry(
    window: ArrayView2<'_, f64>,
    library: &MotifLibrary,
    m: usize,
) -> Result<Vec<f64>> {
    Ok(per_entry_profiles(window, library, m)?
        .iter()
        .flat_map(|p| summarize(p))
        .collect())
}
