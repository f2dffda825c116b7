//! SiMPle matrix profiles over multi-bin feature matrices.
//!
//! The distance between subsequences `i` of A and `j` of B is the plain
//! Euclidean distance over every (bin, frame) cell of the two m-frame slices:
//!
//! ```text
//! d(i, j)^2 = sum_b sum_{t<m} (A[b, i+t] - B[b, j+t])^2
//!           = |a_i|^2 + |b_j|^2 - 2 <a_i, b_j>
//! ```
//!
//! The fast path computes `<a_i, b_j>` for a whole row by FFT
//! cross-correlation, then walks down the rows with the diagonal update
//! `QT[i][j] = QT[i-1][j-1] - <A_{i-1}, B_{j-1}> + <A_{i+m-1}, B_{j+m-1}>`
//! where `A_t` is frame `t`. Query rows are split into fixed blocks that
//! each restart from an FFT row, so results do not depend on worker count.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Spectrogram;
use crate::fft;

/// Largest frame count accepted by [`brute_force_profile`].
pub const BRUTE_FORCE_MAX_FRAMES: usize = 2048;

/// Rows per independently seeded block of the fast path.
const BLOCK_ROWS: usize = 128;

/// Relative cancellation floor: `d^2 < SNAP_REL * (|a|^2 + |b|^2)` is
/// treated as an exact match. This also clamps negative `d^2` to zero.
const SNAP_REL: f64 = 1e-12;

/// Sliding products below this many multiply-adds are computed directly.
const DIRECT_DOT_LIMIT: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinKind {
    #[serde(rename = "self")]
    SelfJoin,
    Ab,
}

/// Nearest-neighbour distance and position for every query subsequence.
///
/// Positions with no admissible neighbour carry an infinite distance and
/// their own position as index.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixProfile {
    pub distances: Vec<f64>,
    pub indices: Vec<usize>,
    pub subsequence_len: usize,
    pub exclusion_radius: usize,
    pub join_kind: JoinKind,
}

impl MatrixProfile {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Where the nearest neighbours are searched.
#[derive(Debug, Clone, Copy)]
pub enum JoinTarget<'a> {
    /// Within the query itself, skipping `|i - j| <= exclusion_radius`.
    SelfJoin { exclusion_radius: usize },
    /// Against another matrix with the same bin count, no exclusion zone.
    Reference(ArrayView2<'a, f64>),
}

/// Parallelism knob for the fast joins.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JoinOptions {
    /// Worker threads; 0 uses the ambient rayon pool, 1 runs inline.
    pub workers: usize,
}

impl JoinOptions {
    pub fn sequential() -> Self {
        Self { workers: 1 }
    }
}

/// Conventional trivial-match radius for self-joins: `m / 2`.
pub fn default_exclusion_radius(m: usize) -> usize {
    m / 2
}

/// Self-join with the ambient thread pool.
pub fn self_join(spec: &Spectrogram, m: usize, exclusion_radius: usize) -> Result<MatrixProfile> {
    self_join_with(spec, m, exclusion_radius, JoinOptions::default())
}

pub fn self_join_with(
    spec: &Spectrogram,
    m: usize,
    exclusion_radius: usize,
    opts: JoinOptions,
) -> Result<MatrixProfile> {
    self_join_matrix(spec.data.view(), m, exclusion_radius, opts)
}

pub fn self_join_matrix(
    data: ArrayView2<'_, f64>,
    m: usize,
    exclusion_radius: usize,
    opts: JoinOptions,
) -> Result<MatrixProfile> {
    check_self(data, m, exclusion_radius)?;
    Ok(fast_join(data, data, m, Some(exclusion_radius), opts))
}

/// AB-join of `query` against `reference` with the ambient thread pool.
pub fn ab_join(query: &Spectrogram, reference: &Spectrogram, m: usize) -> Result<MatrixProfile> {
    ab_join_with(query, reference, m, JoinOptions::default())
}

pub fn ab_join_with(
    query: &Spectrogram,
    reference: &Spectrogram,
    m: usize,
    opts: JoinOptions,
) -> Result<MatrixProfile> {
    ab_join_matrix(query.data.view(), reference.data.view(), m, opts)
}

pub fn ab_join_matrix(
    query: ArrayView2<'_, f64>,
    reference: ArrayView2<'_, f64>,
    m: usize,
    opts: JoinOptions,
) -> Result<MatrixProfile> {
    check_ab(query, reference, m)?;
    Ok(fast_join(query, reference, m, None, opts))
}

/// Direct O(n^2 * m * bins) profile with the same contract as the fast
/// joins. Used as a test oracle; refuses inputs over 2048 frames.
pub fn brute_force_profile(
    query: ArrayView2<'_, f64>,
    target: JoinTarget<'_>,
    m: usize,
) -> Result<MatrixProfile> {
    let (reference, exclusion) = match target {
        JoinTarget::SelfJoin { exclusion_radius } => {
            check_self(query, m, exclusion_radius)?;
            (query, Some(exclusion_radius))
        }
        JoinTarget::Reference(r) => {
            check_ab(query, r, m)?;
            (r, None)
        }
    };
    let longest = query.ncols().max(reference.ncols());
    if longest > BRUTE_FORCE_MAX_FRAMES {
        return Err(Error::Size(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_FRAMES} frames, got {longest}"
        )));
    }

    let n_query = query.ncols() - m + 1;
    let n_ref = reference.ncols() - m + 1;
    let mut distances = Vec::with_capacity(n_query);
    let mut indices = Vec::with_capacity(n_query);
    for i in 0..n_query {
        let mut best = (f64::INFINITY, i);
        for j in 0..n_ref {
            if excluded(i, j, exclusion) {
                continue;
            }
            let mut acc = 0.0f64;
            for b in 0..query.nrows() {
                for t in 0..m {
                    let d = query[[b, i + t]] - reference[[b, j + t]];
                    acc += d * d;
                }
            }
            let d = acc.sqrt();
            if d < best.0 {
                best = (d, j);
            }
        }
        distances.push(best.0);
        indices.push(best.1);
    }
    Ok(MatrixProfile {
        distances,
        indices,
        subsequence_len: m,
        exclusion_radius: exclusion.unwrap_or(0),
        join_kind: if exclusion.is_some() {
            JoinKind::SelfJoin
        } else {
            JoinKind::Ab
        },
    })
}

/// Dot products of every m-length window of `a` with every m-length window
/// of `b`, computed one FFT cross-correlation per row.
///
/// Entry `[i, j]` is `sum_{t<m} a[i+t] * b[j+t]`.
pub fn sliding_dot(a: &[f64], b: &[f64], m: usize) -> Result<Array2<f64>> {
    if m == 0 || a.len() < m || b.len() < m {
        return Err(Error::Size(format!(
            "need m >= 1 and both rows >= m, got m={m}, |a|={}, |b|={}",
            a.len(),
            b.len()
        )));
    }
    let rows = a.len() - m + 1;
    let cols = b.len() - m + 1;
    let corr = Correlator::new(b, m);
    let mut out = Array2::zeros((rows, cols));
    let mut row = vec![0.0; cols];
    for i in 0..rows {
        row.fill(0.0);
        corr.accumulate(&a[i..i + m], &mut row);
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row[..]));
    }
    Ok(out)
}

fn excluded(i: usize, j: usize, exclusion: Option<usize>) -> bool {
    exclusion.is_some_and(|r| i.abs_diff(j) <= r)
}

fn check_finite(data: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains NaN/Inf")))
    }
}

fn check_self(data: ArrayView2<'_, f64>, m: usize, exclusion_radius: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Size(format!("subsequence length must be >= 2, got {m}")));
    }
    if data.nrows() == 0 {
        return Err(Error::Size("matrix has no bins".into()));
    }
    let needed = m + exclusion_radius + 1;
    if data.ncols() < needed {
        return Err(Error::Size(format!(
            "self-join needs at least {needed} frames (m={m}, exclusion={exclusion_radius}), got {}",
            data.ncols()
        )));
    }
    check_finite(data, "input")
}

fn check_ab(query: ArrayView2<'_, f64>, reference: ArrayView2<'_, f64>, m: usize) -> Result<()> {
    if query.nrows() != reference.nrows() {
        return Err(Error::Shape(format!(
            "bin counts differ: query {} vs reference {}",
            query.nrows(),
            reference.nrows()
        )));
    }
    if m == 0 {
        return Err(Error::Size("subsequence length must be >= 1".into()));
    }
    if query.nrows() == 0 {
        return Err(Error::Size("matrix has no bins".into()));
    }
    if query.ncols() < m || reference.ncols() < m {
        return Err(Error::Size(format!(
            "both inputs need at least m={m} frames, got {} and {}",
            query.ncols(),
            reference.ncols()
        )));
    }
    check_finite(query, "query")?;
    check_finite(reference, "reference")
}

/// FFT cross-correlation of short queries against one fixed series.
struct Correlator {
    m: usize,
    n_out: usize,
    fft_len: usize,
    series_spectrum: Vec<Complex<f64>>,
    series: Vec<f64>,
}

impl Correlator {
    fn new(series: &[f64], m: usize) -> Self {
        let n_out = series.len() - m + 1;
        let fft_len = (series.len() + m - 1).next_power_of_two();
        let mut spectrum: Vec<Complex<f64>> = series
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(fft_len)
            .collect();
        fft::forward(fft_len).process(&mut spectrum);
        Self {
            m,
            n_out,
            fft_len,
            series_spectrum: spectrum,
            series: series.to_vec(),
        }
    }

    /// Adds `q . series[j..j+m]` for every j into `out`.
    fn accumulate(&self, q: &[f64], out: &mut [f64]) {
        debug_assert_eq!(q.len(), self.m);
        let m = self.m;
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); self.fft_len];
        for (slot, &x) in buf.iter_mut().zip(q.iter().rev()) {
            *slot = Complex::new(x, 0.0);
        }
        fft::forward(self.fft_len).process(&mut buf);
        for (x, s) in buf.iter_mut().zip(&self.series_spectrum) {
            *x *= s;
        }
        fft::inverse(self.fft_len).process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        for (o, v) in out.iter_mut().zip(&buf[m - 1..m - 1 + self.n_out]) {
            *o += v.re * scale;
        }
    }

    fn accumulate_direct(&self, q: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o += q.iter().zip(&self.series[j..j + self.m]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// Frame-major copy: frame `t` occupies `[t * bins, (t + 1) * bins)`.
struct Frames {
    bins: usize,
    data: Vec<f64>,
}

impl Frames {
    fn new(view: ArrayView2<'_, f64>) -> Self {
        let bins = view.nrows();
        let mut data = Vec::with_capacity(view.len());
        for col in view.columns() {
            data.extend(col.iter());
        }
        Self { bins, data }
    }

    #[inline]
    fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    /// Squared norm of every m-frame window, each summed directly.
    fn window_norms(&self, m: usize) -> Vec<f64> {
        let frames = self.data.len() / self.bins;
        let sq: Vec<f64> = (0..frames)
            .map(|t| self.frame(t).iter().map(|v| v * v).sum())
            .collect();
        sq.windows(m).map(|w| w.iter().sum()).collect()
    }
}

#[inline]
fn frame_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-bin correlators against one series, dispatching between FFT and
/// direct products by size.
struct RowDots {
    correlators: Vec<Correlator>,
    use_fft: bool,
}

impl RowDots {
    fn new(series: ArrayView2<'_, f64>, m: usize) -> Self {
        let n = series.ncols();
        let use_fft = m * (n - m + 1) > DIRECT_DOT_LIMIT;
        let correlators = series
            .rows()
            .into_iter()
            .map(|row| Correlator::new(&row.to_vec(), m))
            .collect();
        Self { correlators, use_fft }
    }

    /// `out[j] = sum_b <query_b[start..start+m], series_b[j..j+m]>`.
    fn row(&self, query: ArrayView2<'_, f64>, start: usize, out: &mut [f64]) {
        out.fill(0.0);
        let m = self.correlators[0].m;
        for (b, corr) in self.correlators.iter().enumerate() {
            let q: Vec<f64> = query.row(b).iter().skip(start).take(m).copied().collect();
            if self.use_fft {
                corr.accumulate(&q, out);
            } else {
                corr.accumulate_direct(&q, out);
            }
        }
    }
}

fn fast_join(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    m: usize,
    exclusion: Option<usize>,
    opts: JoinOptions,
) -> MatrixProfile {
    let n_a = a.ncols() - m + 1;
    let n_b = b.ncols() - m + 1;
    let frames_a = Frames::new(a);
    let frames_b = Frames::new(b);
    let norm_a = frames_a.window_norms(m);
    let norm_b = frames_b.window_norms(m);

    // Row seeds come from correlating against B; the first column from
    // correlating B's first window against A.
    let against_b = RowDots::new(b, m);
    let mut first_col = vec![0.0; n_a];
    RowDots::new(a, m).row(b, 0, &mut first_col);

    let ctx = JoinContext {
        a,
        m,
        n_b,
        exclusion,
        frames_a: &frames_a,
        frames_b: &frames_b,
        norm_a: &norm_a,
        norm_b: &norm_b,
        first_col: &first_col,
        against_b: &against_b,
    };

    let blocks: Vec<(usize, usize)> = (0..n_a)
        .step_by(BLOCK_ROWS)
        .map(|s| (s, (s + BLOCK_ROWS).min(n_a)))
        .collect();

    let results: Vec<Vec<(f64, usize)>> = match opts.workers {
        1 => blocks.iter().map(|&blk| ctx.block(blk)).collect(),
        0 => blocks.par_iter().map(|&blk| ctx.block(blk)).collect(),
        w => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| blocks.par_iter().map(|&blk| ctx.block(blk)).collect()),
            Err(_) => blocks.iter().map(|&blk| ctx.block(blk)).collect(),
        },
    };

    let (distances, indices) = results.into_iter().flatten().unzip();
    MatrixProfile {
        distances,
        indices,
        subsequence_len: m,
        exclusion_radius: exclusion.unwrap_or(0),
        join_kind: if exclusion.is_some() {
            JoinKind::SelfJoin
        } else {
            JoinKind::Ab
        },
    }
}

struct JoinContext<'a> {
    a: ArrayView2<'a, f64>,
    m: usize,
    n_b: usize,
    exclusion: Option<usize>,
    frames_a: &'a Frames,
    frames_b: &'a Frames,
    norm_a: &'a [f64],
    norm_b: &'a [f64],
    first_col: &'a [f64],
    against_b: &'a RowDots,
}

impl JoinContext<'_> {
    fn block(&self, (start, end): (usize, usize)) -> Vec<(f64, usize)> {
        let m = self.m;
        let mut qt = vec![0.0; self.n_b];
        self.against_b.row(self.a, start, &mut qt);

        let mut out = Vec::with_capacity(end - start);
        for i in start..end {
            if i > start {
                let drop_a = self.frames_a.frame(i - 1);
                let add_a = self.frames_a.frame(i + m - 1);
                for j in (1..self.n_b).rev() {
                    qt[j] = qt[j - 1] - frame_dot(drop_a, self.frames_b.frame(j - 1))
                        + frame_dot(add_a, self.frames_b.frame(j + m - 1));
                }
                qt[0] = self.first_col[i];
            }
            out.push(self.nearest(i, &qt));
        }
        out
    }

    #[inline]
    fn nearest(&self, i: usize, qt: &[f64]) -> (f64, usize) {
        let na = self.norm_a[i];
        let mut best_d2 = f64::INFINITY;
        let mut best_j = i;
        for (j, (&dot, &nb)) in qt.iter().zip(self.norm_b).enumerate() {
            if excluded(i, j, self.exclusion) {
                continue;
            }
            let mut d2 = na + nb - 2.0 * dot;
            if d2 < SNAP_REL * (na + nb) {
                d2 = 0.0;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best_j = j;
            }
        }
        (best_d2.sqrt(), best_j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(bins: usize, frames: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((bins, frames), |_| rng.random::<f64>())
    }

    fn naive_sliding(a: &[f64], b: &[f64], m: usize) -> Array2<f64> {
        Array2::from_shape_fn((a.len() - m + 1, b.len() - m + 1), |(i, j)| {
            (0..m).map(|t| a[i + t] * b[j + t]).sum()
        })
    }

    fn assert_matches(fast: &MatrixProfile, oracle: &MatrixProfile, tol: f64) {
        assert_eq!(fast.len(), oracle.len());
        assert_eq!(fast.join_kind, oracle.join_kind);
        assert_eq!(fast.subsequence_len, oracle.subsequence_len);
        for (i, (f, o)) in fast.distances.iter().zip(&oracle.distances).enumerate() {
            assert!((f - o).abs() <= tol, "position {i}: {f} vs {o}");
        }
    }

    #[test]
    fn sliding_dot_small_example() {
        let a = [1.0, 0.0, 0.0, 1.0];
        let fast = sliding_dot(&a, &a, 2).unwrap();
        let direct = naive_sliding(&a, &a, 2);
        for (x, y) in fast.iter().zip(direct.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn sliding_dot_degenerate_cases() {
        let zeros = [0.0; 10];
        assert!(sliding_dot(&zeros, &zeros, 3).unwrap().iter().all(|v| v.abs() < 1e-12));

        let a = [0.5, -1.0, 2.0, 3.0];
        let b = [1.0, 2.0, -0.5, 0.25];
        let full = sliding_dot(&a, &b, 4).unwrap();
        assert_eq!(full.dim(), (1, 1));
        let expected: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((full[[0, 0]] - expected).abs() < 1e-12);

        assert!(matches!(sliding_dot(&a, &b, 5), Err(Error::Size(_))));
    }

    #[test]
    fn constant_input_has_zero_profile() {
        let data = Array2::from_elem((4, 40), 3.0);
        let mp = self_join_matrix(data.view(), 6, 3, JoinOptions::sequential()).unwrap();
        assert_eq!(mp.len(), 35);
        assert!(mp.distances.iter().all(|&d| d == 0.0));
        for (i, &j) in mp.indices.iter().enumerate() {
            let lowest = if i > 3 { 0 } else { i + 4 };
            assert_eq!(j, lowest, "position {i}");
        }
    }

    #[test]
    fn constant_input_through_fft_path_is_still_exact() {
        let data = Array2::from_elem((16, 900), -37.5);
        let mp = self_join_matrix(data.view(), 200, 100, JoinOptions::sequential()).unwrap();
        assert!(mp.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn random_self_join_matches_oracle() {
        let data = random_matrix(4, 64, 7);
        let fast = self_join_matrix(data.view(), 8, 4, JoinOptions::sequential()).unwrap();
        let oracle =
            brute_force_profile(data.view(), JoinTarget::SelfJoin { exclusion_radius: 4 }, 8).unwrap();
        assert_matches(&fast, &oracle, 1e-10);
        assert_eq!(fast.indices, oracle.indices);
        for (i, &j) in fast.indices.iter().enumerate() {
            assert!(i.abs_diff(j) > 4);
        }
    }

    #[test]
    fn cens_sized_profile_length() {
        let data = random_matrix(12, 292, 1);
        let mp = self_join_matrix(data.view(), 50, 25, JoinOptions::default()).unwrap();
        assert_eq!(mp.len(), 243);
    }

    #[test]
    fn ab_join_with_itself_is_identity() {
        let data = random_matrix(5, 90, 2);
        let mp = ab_join_matrix(data.view(), data.view(), 10, JoinOptions::default()).unwrap();
        assert!(mp.distances.iter().all(|&d| d == 0.0));
        assert_eq!(mp.indices, (0..81).collect::<Vec<_>>());
        assert_eq!(mp.join_kind, JoinKind::Ab);
    }

    #[test]
    fn ab_join_identity_at_mel_scale() {
        // dB-like magnitudes exercise the cancellation floor through the FFT path
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = Array2::from_shape_fn((16, 1200), |_| -100.0 + 80.0 * rng.random::<f64>());
        let mp = ab_join_matrix(data.view(), data.view(), 400, JoinOptions::default()).unwrap();
        for (i, (&d, &j)) in mp.distances.iter().zip(&mp.indices).enumerate() {
            assert_eq!((d, j), (0.0, i));
        }
    }

    #[test]
    fn ab_join_finds_planted_copy() {
        let query = random_matrix(3, 40, 3);
        let mut reference = random_matrix(3, 100, 4);
        reference
            .slice_mut(ndarray::s![.., 17..17 + 12])
            .assign(&query.slice(ndarray::s![.., 5..5 + 12]));
        let mp = ab_join_matrix(query.view(), reference.view(), 12, JoinOptions::sequential()).unwrap();
        assert_eq!(mp.distances[5], 0.0);
        assert_eq!(mp.indices[5], 17);
    }

    #[test]
    fn ab_join_shape_mismatch() {
        let a = random_matrix(3, 40, 3);
        let b = random_matrix(4, 40, 3);
        assert!(matches!(
            ab_join_matrix(a.view(), b.view(), 5, JoinOptions::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn size_and_input_errors() {
        let a = random_matrix(3, 20, 3);
        assert!(matches!(
            self_join_matrix(a.view(), 10, 10, JoinOptions::default()),
            Err(Error::Size(_))
        ));
        assert!(matches!(
            self_join_matrix(a.view(), 1, 0, JoinOptions::default()),
            Err(Error::Size(_))
        ));
        let mut bad = a.clone();
        bad[[1, 4]] = f64::NAN;
        assert!(matches!(
            self_join_matrix(bad.view(), 4, 2, JoinOptions::default()),
            Err(Error::NonFinite(_))
        ));
        let big = Array2::<f64>::zeros((1, 2049));
        assert!(matches!(
            brute_force_profile(big.view(), JoinTarget::SelfJoin { exclusion_radius: 2 }, 4),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn unmatched_positions_are_infinite() {
        // 7 subsequences with radius 4: the middle ones have nobody far enough away
        let data = random_matrix(2, 10, 5);
        let mp = self_join_matrix(data.view(), 4, 4, JoinOptions::default()).unwrap();
        let oracle =
            brute_force_profile(data.view(), JoinTarget::SelfJoin { exclusion_radius: 4 }, 4).unwrap();
        assert_eq!(mp.distances.len(), 7);
        assert!(mp.distances[3].is_infinite());
        assert_eq!(mp.indices[3], 3);
        for (f, o) in mp.distances.iter().zip(&oracle.distances) {
            assert!(f == o || (f - o).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_repeat_with_zero_exclusion() {
        let mut data = random_matrix(3, 60, 9);
        let block = data.slice(ndarray::s![.., 5..15]).to_owned();
        data.slice_mut(ndarray::s![.., 35..45]).assign(&block);
        let mp = self_join_matrix(data.view(), 10, 0, JoinOptions::default());
        // radius 0 still excludes the trivial j == i match
        let mp = mp.unwrap();
        assert_eq!(mp.distances[5], 0.0);
        assert_eq!(mp.indices[5], 35);
        assert_eq!(mp.distances[35], 0.0);
        assert_eq!(mp.indices[35], 5);
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let data = random_matrix(6, 700, 12);
        let one = self_join_matrix(data.view(), 30, 15, JoinOptions { workers: 1 }).unwrap();
        let four = self_join_matrix(data.view(), 30, 15, JoinOptions { workers: 4 }).unwrap();
        let ambient = self_join_matrix(data.view(), 30, 15, JoinOptions::default()).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, ambient);
    }

    #[test]
    fn oracle_distance_is_symmetric() {
        let a = random_matrix(3, 30, 21);
        let b = random_matrix(3, 30, 22);
        let m = 6;
        let ab = sliding_dot(a.row(0).as_slice().unwrap(), b.row(0).as_slice().unwrap(), m).unwrap();
        let ba = sliding_dot(b.row(0).as_slice().unwrap(), a.row(0).as_slice().unwrap(), m).unwrap();
        for i in 0..ab.nrows() {
            for j in 0..ab.ncols() {
                assert!((ab[[i, j]] - ba[[j, i]]).abs() < 1e-9);
            }
        }
        let pa = brute_force_profile(a.view(), JoinTarget::Reference(b.view()), m).unwrap();
        let pb = brute_force_profile(b.view(), JoinTarget::Reference(a.view()), m).unwrap();
        // min over a row of a symmetric matrix bounds the column minima
        let global_a = pa.distances.iter().copied().fold(f64::INFINITY, f64::min);
        let global_b = pb.distances.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((global_a - global_b).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn fast_paths_match_oracle(
            bins in prop::sample::select(vec![1usize, 4, 12]),
            m in 2usize..24,
            extra in 2usize..200,
            seed in any::<u64>(),
            ab in any::<bool>(),
        ) {
            let frames = m + extra;
            let a = random_matrix(bins, frames, seed);
            if ab {
                let b = random_matrix(bins, frames / 2 + m, seed ^ 0x5555);
                let fast = ab_join_matrix(a.view(), b.view(), m, JoinOptions::default()).unwrap();
                let oracle = brute_force_profile(a.view(), JoinTarget::Reference(b.view()), m).unwrap();
                for (f, o) in fast.distances.iter().zip(&oracle.distances) {
                    prop_assert!((f - o).abs() <= 1e-10, "{} vs {}", f, o);
                }
            } else {
                let r = m / 2;
                prop_assume!(frames >= m + r + 1);
                let fast = self_join_matrix(a.view(), m, r, JoinOptions::default()).unwrap();
                let oracle = brute_force_profile(a.view(), JoinTarget::SelfJoin { exclusion_radius: r }, m).unwrap();
                for (f, o) in fast.distances.iter().zip(&oracle.distances) {
                    prop_assert!(f == o || (f - o).abs() <= 1e-10, "{} vs {}", f, o);
                }
                for (i, (&j, d)) in fast.indices.iter().zip(&fast.distances).enumerate() {
                    if d.is_finite() {
                        prop_assert!(i.abs_diff(j) > r);
                    }
                }
            }
        }

        #[test]
        fn extending_reference_never_increases_distances(
            seed in any::<u64>(),
            extra in 1usize..60,
        ) {
            let q = random_matrix(4, 50, seed);
            let r = random_matrix(4, 80 + extra, seed.wrapping_add(1));
            let short = ab_join_matrix(q.view(), r.slice(ndarray::s![.., ..80]), 8, JoinOptions::default()).unwrap();
            let long = ab_join_matrix(q.view(), r.view(), 8, JoinOptions::default()).unwrap();
            for (s, l) in short.distances.iter().zip(&long.distances) {
                prop_assert!(*l <= *s + 1e-12);
            }
        }
    }
}
