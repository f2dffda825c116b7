#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use birdmotif::audio_io::{write_wav, WavEncoding};
use birdmotif::AudioBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SR: u32 = 22050;

/// Song-like signal: random short tonal notes over light noise.
pub fn birdsong(seconds: f64, seed: u64) -> Vec<f32> {
    let n = (seconds * SR as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut out: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    let mut t = 0usize;
    while t < n {
        let len = rng.random_range(SR as usize / 10..SR as usize / 3);
        let f0 = rng.random_range(300.0..3000.0);
        let f1 = f0 * rng.random_range(0.7..1.4);
        add_sweep(&mut out[t..(t + len).min(n)], f0, f1, 0.3);
        t += len + rng.random_range(SR as usize / 20..SR as usize / 4);
    }
    out.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect()
}

/// Adds a linear sweep from `f0` to `f1` Hz with a Hann envelope.
pub fn add_sweep(dst: &mut [f64], f0: f64, f1: f64, amp: f64) {
    let len = dst.len();
    let mut phase = 0.0;
    for (i, v) in dst.iter_mut().enumerate() {
        let frac = i as f64 / len.max(1) as f64;
        let f = f0 + (f1 - f0) * frac;
        phase += 2.0 * PI * f / SR as f64;
        let env = 0.5 - 0.5 * (2.0 * PI * frac).cos();
        *v += amp * env * phase.sin();
    }
}

pub fn write_track(path: &Path, samples: Vec<f32>) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let buf = AudioBuffer::new(samples, SR, "synthetic").unwrap();
    write_wav(path, &buf, WavEncoding::Pcm16).unwrap();
}

/// `n` tracks spread round-robin over `species`, durations in
/// `[min_s, max_s)`. Returns the track ids in creation order.
pub fn corpus(root: &Path, n: usize, species: &[&str], min_s: f64, max_s: f64, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sp = species[i % species.len()];
            let id = format!("XC{:04}", 100 + i);
            let secs = rng.random_range(min_s..max_s);
            write_track(&root.join(sp).join(format!("{id}.wav")), birdsong(secs, seed * 1000 + i as u64));
            id
        })
        .collect()
}

/// Every regular file under `dir`, relative path and bytes, sorted.
pub fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            (
                e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

/// Melody of `notes` sustained tones (equal length, random pitch between
/// 200 and 2000 Hz) filling `seconds`.
pub fn melody(seconds: f64, notes: usize, seed: u64) -> Vec<f32> {
    let n = (seconds * SR as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0f64; n];
    let per = n / notes;
    for k in 0..notes {
        let f = 200.0 * 10f64.powf(rng.random_range(0.0..1.0));
        let end = if k + 1 == notes { n } else { (k + 1) * per };
        let mut phase = 0.0;
        for v in &mut out[k * per..end] {
            phase += 2.0 * PI * f / SR as f64;
            *v = 0.4 * phase.sin();
        }
    }
    out.into_iter().map(|v| v as f32).collect()
}
