use std::path::Path;
use std::process::{Command, Output};

use birdmotif::audio_io::{write_wav, WavEncoding};
use birdmotif::AudioBuffer;

fn birdmotif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_birdmotif"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn track(path: &Path, seconds: f64, seed: u64) {
    let rate = 22050;
    let n = (seconds * rate as f64) as usize;
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    let samples = (0..n)
        .map(|i| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let noise = ((state >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.05;
            let f = 400.0 + 300.0 * ((i / 4410) % 7) as f64 + 50.0 * seed as f64;
            (0.3 * (std::f64::consts::TAU * f * i as f64 / rate as f64).sin() + noise) as f32
        })
        .collect();
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_wav(path, &AudioBuffer::new(samples, rate, "t").unwrap(), WavEncoding::Pcm16).unwrap();
}

fn dataset(root: &Path) {
    for (i, sp) in ["alpha", "beta", "alpha", "beta"].iter().enumerate() {
        track(&root.join(sp).join(format!("XC{i}.wav")), 9.0 + i as f64, i as u64);
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&birdmotif(&["--help"])), 0);
    assert_eq!(code(&birdmotif(&["profile", "--bogus"])), 1);
    assert_eq!(code(&birdmotif(&["profile", "--out", "/tmp/x"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[params]\nn_fft = 1000\n").unwrap();
    let o = birdmotif(&["profile", "--input", s(dir.path()), "--out", s(&dir.path().join("o")), "--config", s(&cfg)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn empty_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = birdmotif(&["profile", "--input", s(&empty), "--out", s(&dir.path().join("o1"))]);
    assert_eq!(code(&o), 2);
    let o = birdmotif(&["profile", "--input", s(&dir.path().join("nope")), "--out", s(&dir.path().join("o2"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("train_audio");
    dataset(&root);
    let prof = dir.path().join("profiles");

    let o = birdmotif(&["profile", "--input", s(&root), "--out", s(&prof), "--workers", "2", "--seed", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("4 ok"));
    let cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(prof.join("config.json")).unwrap()).unwrap();
    assert_eq!((cfg["workers"].as_u64(), cfg["seed"].as_u64()), (Some(2), Some(4)));
    assert_eq!(cfg["simple_window"], 50);

    let out = dir.path().join("motifs");
    assert_eq!(code(&birdmotif(&["motifs", "--input", s(&prof), "--out", s(&out), "--k", "2"])), 0);
    assert!(out.join("motifs.csv").is_file());

    let out = dir.path().join("plots");
    assert_eq!(code(&birdmotif(&["plot-data", "--input", s(&prof), "--out", s(&out)])), 0);
    assert!(out.join("alpha/XC0/profile.csv").is_file());
    assert!(out.join("beta/XC3/spectrogram.csv").is_file());

    let out = dir.path().join("join");
    let o = birdmotif(&[
        "join-features", "--input", s(&prof), "--out", s(&out), "--library-size", "3", "--per-entry", "--label-source", "discord",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lib: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("library.json")).unwrap()).unwrap();
    assert_eq!(lib["label_source"], "discord");
    let header = std::fs::read_to_string(out.join("join_features.csv")).unwrap();
    assert!(header.starts_with("track_id,window_index,e0_min,e0_median,e0_max,e1_min"));
    let o = birdmotif(&["join-features", "--input", s(&prof), "--out", s(&out), "--library-size", "9"]);
    assert_eq!(code(&o), 2);

    let out = dir.path().join("triplets");
    let o = birdmotif(&[
        "triplets", "--input", s(&root), "--profiles", s(&prof), "--out", s(&out), "--batch-size", "4", "--species-queue",
        "--augment", "classifier",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("batch_00000_anchor.npy").is_file());
    for line in std::fs::read_to_string(out.join("index.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_ne!(v["species_anchor"], v["species_distant"]);
    }

    let feats = dir.path().join("mel");
    let o = birdmotif(&["features", "--input", s(&root), "--out", s(&feats), "--feature", "mel", "--workers", "1"]);
    assert_eq!(code(&o), 0);
    let manifest = std::fs::read_to_string(feats.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 5);
    assert!(manifest.lines().skip(1).all(|l| l.contains(",mel,") && l.ends_with(",ok")));
}

#[test]
fn post_processing_needs_a_profile_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = birdmotif(&["motifs", "--input", s(dir.path()), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 3);
}
