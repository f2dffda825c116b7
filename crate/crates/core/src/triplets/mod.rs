//! Triplet sampling from precomputed SiMPle indices.
//!
//! Every 5 s window of a track is paired with the window holding its
//! nearest neighbour according to the track's self-join index. Triplets
//! then take their distant element from the anchor window of a pair that
//! belongs to another track (or another species, for queue batches).

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod augment;

pub use augment::{
    add_noise_snr, apply_gain, colored_noise, time_shift, AugmentConfig, Augmenter, MAX_SHIFT_FRACTION,
};

/// Anchor/neighbour windows of one track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPair {
    pub track_id: String,
    pub species: String,
    pub anchor_index: usize,
    pub neighbor_index: usize,
}

impl WindowPair {
    /// The neighbour collapsed onto the anchor's own window.
    pub fn is_degenerate(&self) -> bool {
        self.anchor_index == self.neighbor_index
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowRef {
    pub track_id: String,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub anchor: WindowRef,
    pub neighbor: WindowRef,
    pub distant: WindowRef,
    pub anchor_species: String,
    pub distant_species: String,
    pub degenerate: bool,
}

impl TripletRecord {
    fn from_pairs(pair: &WindowPair, distant: &WindowPair) -> Self {
        Self {
            anchor: WindowRef {
                track_id: pair.track_id.clone(),
                window: pair.anchor_index,
            },
            neighbor: WindowRef {
                track_id: pair.track_id.clone(),
                window: pair.neighbor_index,
            },
            distant: WindowRef {
                track_id: distant.track_id.clone(),
                window: distant.anchor_index,
            },
            anchor_species: pair.species.clone(),
            distant_species: distant.species.clone(),
            degenerate: pair.is_degenerate(),
        }
    }
}

/// Output of an embedding model for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self(values))
        } else {
            Err(Error::NonFinite("embedding has NaN/Inf entries".into()))
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Hinge triplet loss `max(0, |a - n| - |a - d| + margin)`.
pub fn triplet_loss(
    anchor: &EmbeddingVector,
    neighbor: &EmbeddingVector,
    distant: &EmbeddingVector,
    margin: f64,
) -> Result<f64> {
    if anchor.dim() != neighbor.dim() || anchor.dim() != distant.dim() {
        return Err(Error::Shape(format!(
            "embedding dimensions differ: {}, {}, {}",
            anchor.dim(),
            neighbor.dim(),
            distant.dim()
        )));
    }
    if !(margin >= 0.0) {
        return Err(Error::Argument(format!("margin must be >= 0, got {margin}")));
    }
    Ok((anchor.distance(neighbor) - anchor.distance(distant) + margin).max(0.0))
}

/// Reduces a frame-level self-join index to window granularity.
///
/// Window `w` is represented by the profile position at its first frame,
/// `floor(w * frames_per_window)` (clamped to the last profile position),
/// and its neighbour is the window containing that position's match.
pub fn window_neighbors(indices: &[usize], frames_per_window: f64, n_windows: usize) -> Result<Vec<usize>> {
    if indices.is_empty() {
        return Err(Error::DataIntegrity("profile index is empty".into()));
    }
    if !(frames_per_window > 0.0) {
        return Err(Error::Argument(format!(
            "frames per window must be positive, got {frames_per_window}"
        )));
    }
    (0..n_windows)
        .map(|w| {
            let frame = ((w as f64 * frames_per_window).floor() as usize).min(indices.len() - 1);
            let neighbor = (indices[frame] as f64 / frames_per_window).floor() as usize;
            if neighbor >= n_windows {
                Err(Error::DataIntegrity(format!(
                    "frame {} maps to window {neighbor} of {n_windows}",
                    indices[frame]
                )))
            } else {
                Ok(neighbor)
            }
        })
        .collect()
}

/// A track's windows with the window-level nearest neighbour of each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackNeighbors {
    pub track_id: String,
    pub species: String,
    pub neighbors: Vec<usize>,
}

/// One pair per window, ordered by track then window.
pub fn build_pairs(tracks: &[TrackNeighbors]) -> Result<Vec<WindowPair>> {
    let per_track: Vec<Vec<WindowPair>> = tracks
        .par_iter()
        .map(|t| {
            let n = t.neighbors.len();
            t.neighbors
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    if j >= n {
                        return Err(Error::DataIntegrity(format!(
                            "track {}: window {i} points at window {j} of {n}",
                            t.track_id
                        )));
                    }
                    Ok(WindowPair {
                        track_id: t.track_id.clone(),
                        species: t.species.clone(),
                        anchor_index: i,
                        neighbor_index: j,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_track.into_iter().flatten().collect())
}

/// One triplet per pair; the distant element is the anchor window of a
/// pair drawn uniformly among pairs from other tracks.
pub fn form_triplets(pairs: &[WindowPair], rng_seed: u64) -> Result<Vec<TripletRecord>> {
    let mut by_track: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        by_track.entry(p.track_id.as_str()).or_default().push(i);
    }
    if by_track.len() < 2 {
        return Err(Error::InsufficientDiversity(format!(
            "triplets need pairs from at least 2 tracks, got {}",
            by_track.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = pairs.len();
    Ok(pairs
        .iter()
        .map(|pair| {
            let own = &by_track[pair.track_id.as_str()];
            // r-th pair outside `own`; `own` is sorted
            let mut idx = rng.random_range(0..n - own.len());
            for &pos in own {
                if pos <= idx {
                    idx += 1;
                } else {
                    break;
                }
            }
            TripletRecord::from_pairs(pair, &pairs[idx])
        })
        .collect())
}

/// Mini-batches built by popping round-robin from per-species queues.
///
/// Exhausted queues drop out. A batch is emitted only if it holds at least
/// two species; the first batch that cannot ends the stream.
#[derive(Debug)]
pub struct SpeciesQueueBatches {
    queues: Vec<(String, VecDeque<WindowPair>)>,
    cursor: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    dropped: usize,
}

impl SpeciesQueueBatches {
    /// Pairs left unbatched because fewer than two species remained.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    fn pop_next(&mut self) -> Option<WindowPair> {
        while !self.queues.is_empty() {
            let slot = self.cursor % self.queues.len();
            match self.queues[slot].1.pop_front() {
                Some(pair) => {
                    if self.queues[slot].1.is_empty() {
                        self.queues.remove(slot);
                        self.cursor = slot;
                    } else {
                        self.cursor = slot + 1;
                    }
                    return Some(pair);
                }
                None => {
                    self.queues.remove(slot);
                }
            }
        }
        None
    }
}

impl Iterator for SpeciesQueueBatches {
    type Item = Vec<TripletRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut batch = Vec::with_capacity(self.batch_size);
        while batch.len() < self.batch_size {
            match self.pop_next() {
                Some(p) => batch.push(p),
                None => break,
            }
        }
        let first_species = batch.first().map(|p| p.species.clone())?;
        if batch.iter().all(|p| p.species == first_species) {
            self.dropped += batch.len() + self.queues.iter().map(|(_, q)| q.len()).sum::<usize>();
            self.queues.clear();
            return None;
        }

        let triplets = batch
            .iter()
            .map(|pair| {
                let others: Vec<&WindowPair> = batch.iter().filter(|p| p.species != pair.species).collect();
                let distant = others[self.rng.random_range(0..others.len())];
                TripletRecord::from_pairs(pair, distant)
            })
            .collect();
        Some(triplets)
    }
}

/// Groups pairs into species queues (species in lexicographic order, pairs
/// in input order) and returns the batch stream.
pub fn species_queue_batches(
    pairs: impl IntoIterator<Item = WindowPair>,
    batch_size: usize,
    rng_seed: u64,
) -> Result<SpeciesQueueBatches> {
    if batch_size < 2 {
        return Err(Error::Argument(format!("batch size must be >= 2, got {batch_size}")));
    }
    let mut queues: BTreeMap<String, VecDeque<WindowPair>> = BTreeMap::new();
    for p in pairs {
        queues.entry(p.species.clone()).or_default().push_back(p);
    }
    if queues.len() < 2 {
        return Err(Error::InsufficientDiversity(format!(
            "queue batching needs at least 2 species, got {}",
            queues.len()
        )));
    }
    Ok(SpeciesQueueBatches {
        queues: queues.into_iter().collect(),
        cursor: 0,
        batch_size,
        rng: ChaCha8Rng::seed_from_u64(rng_seed),
        dropped: 0,
    })
}
