//! Motifs (profile minima), discords (profile maxima) and their time stamps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simple_mp::{JoinKind, MatrixProfile};

/// A matched subsequence pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub position: usize,
    pub partner: usize,
    pub distance: f64,
}

/// The motif and discord of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotifResult {
    pub motif_a: usize,
    pub motif_b: usize,
    pub motif_distance: f64,
    pub discord: usize,
    pub discord_distance: f64,
    pub subsequence_len: usize,
}

impl MotifResult {
    pub fn from_profile(mp: &MatrixProfile) -> Result<Self> {
        let motif = extract_motif(mp)?;
        let (discord, discord_distance) = extract_discord(mp)?;
        Ok(Self {
            motif_a: motif.position,
            motif_b: motif.partner,
            motif_distance: motif.distance,
            discord,
            discord_distance,
            subsequence_len: mp.subsequence_len,
        })
    }
}

/// Lowest finite distance; ties go to the lowest position.
pub fn extract_motif(mp: &MatrixProfile) -> Result<Motif> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &d) in mp.distances.iter().enumerate() {
        if d.is_finite() && best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    let (position, distance) = best.ok_or(Error::NoMotif)?;
    Ok(Motif {
        position,
        partner: mp.indices[position],
        distance,
    })
}

/// Highest finite distance; ties go to the lowest position.
pub fn extract_discord(mp: &MatrixProfile) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &d) in mp.distances.iter().enumerate() {
        if d.is_finite() && best.is_none_or(|(_, b)| d > b) {
            best = Some((i, d));
        }
    }
    best.ok_or(Error::NoMotif)
}

/// Up to `k` motifs in nondecreasing distance order.
///
/// After each pick, every position within the exclusion radius of either
/// member is masked, and later picks whose partner falls in a masked zone
/// are skipped. For AB-joins the partner indexes another series, so only
/// the query side is masked.
pub fn top_k_motifs(mp: &MatrixProfile, k: usize) -> Vec<Motif> {
    let n = mp.len();
    let radius = mp.exclusion_radius;
    let self_join = mp.join_kind == JoinKind::SelfJoin;

    let mut order: Vec<usize> = (0..n).filter(|&i| mp.distances[i].is_finite()).collect();
    order.sort_by(|&a, &b| mp.distances[a].total_cmp(&mp.distances[b]).then(a.cmp(&b)));

    let mut masked = vec![false; n];
    let mut out = Vec::new();
    for i in order {
        if out.len() >= k {
            break;
        }
        let j = mp.indices[i];
        if masked[i] || (self_join && j < n && masked[j]) {
            continue;
        }
        out.push(Motif {
            position: i,
            partner: j,
            distance: mp.distances[i],
        });
        mask_around(&mut masked, i, radius);
        if self_join {
            mask_around(&mut masked, j, radius);
        }
    }
    out
}

fn mask_around(masked: &mut [bool], center: usize, radius: usize) {
    let lo = center.saturating_sub(radius);
    let hi = (center + radius + 1).min(masked.len());
    if lo < hi {
        masked[lo..hi].fill(true);
    }
}

/// Seconds at the start of `frame`.
pub fn frame_to_time(frame: usize, frame_rate: f64) -> f64 {
    frame as f64 / frame_rate
}
