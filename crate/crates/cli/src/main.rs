use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use birdmotif::pipeline::{
    export_join_features, export_motifs, export_plot_data, export_triplets, run_batch, JoinExportOptions,
    LabelSource, PipelineConfig, ProfileRun, RunMode, TripletBatching, TripletExportOptions,
};
use birdmotif::triplets::AugmentConfig;
use birdmotif::{Error, FeatureKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

const EXIT_USAGE: u8 = 1;
const EXIT_NO_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;

/// Motif mining and triplet dataset generation for bird audio.
///
/// `features` and `profile` read a `<root>/<species>/<track>.wav` dataset.
/// `motifs`, `join-features` and `plot-data` read the output directory of
/// a `profile` run; `triplets` needs both.
#[derive(Debug, Parser)]
#[command(name = "birdmotif", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Dataset root, or a profile run directory for post-processing commands.
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Pipeline config (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    feature: Option<FeatureArg>,

    /// SiMPle subsequence length in frames.
    #[arg(long, global = true)]
    simple_window: Option<usize>,

    #[arg(long, global = true, value_enum)]
    label_source: Option<LabelArg>,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FeatureArg {
    Mel,
    Cens,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelArg {
    Motif,
    Discord,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AugmentArg {
    Embedding,
    Classifier,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute and persist features for every track.
    Features,
    /// Features plus self-join matrix profile, motif and discord per track.
    Profile,
    /// Top-k motifs of every profiled track.
    Motifs {
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Triplet embedding-frame batches from a profile run.
    Triplets {
        /// Output directory of a `profile` run over the same dataset.
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long, default_value_t = 64)]
        batch_size: usize,
        /// Species-queue batches (distant element always another species).
        #[arg(long)]
        species_queue: bool,
        /// Waveform augmentation preset.
        #[arg(long, value_enum)]
        augment: Option<AugmentArg>,
    },
    /// Matrix-profile join features against a sampled motif library.
    JoinFeatures {
        #[arg(long, default_value_t = 64)]
        library_size: usize,
        /// Emit min/median/max per library entry instead of pooled.
        #[arg(long)]
        per_entry: bool,
    },
    /// Spectrogram and profile CSVs for plotting.
    PlotData,
}

impl Global {
    fn input(&self) -> anyhow::Result<&Path> {
        self.input.as_deref().context("--input is required")
    }

    fn out(&self) -> anyhow::Result<&Path> {
        self.out.as_deref().context("--out is required")
    }

    fn pipeline_config(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_path(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(f) = self.feature {
            cfg.feature_kind = match f {
                FeatureArg::Mel => FeatureKind::Mel,
                FeatureArg::Cens => FeatureKind::Cens,
            };
        }
        if let Some(m) = self.simple_window {
            cfg.simple_window = Some(m);
        }
        if let Some(l) = self.label_source {
            cfg.label_source = label(l);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn open_run(&self, dir: &Path) -> anyhow::Result<ProfileRun> {
        let mut run = ProfileRun::open(dir)?;
        if let Some(l) = self.label_source {
            run.config.label_source = label(l);
        }
        if run.tracks.is_empty() {
            return Err(Error::EmptyInput(format!("{} has no processed tracks", dir.display())).into());
        }
        Ok(run)
    }

    fn seed_for(&self, run: &ProfileRun) -> u64 {
        self.seed.unwrap_or(run.config.seed)
    }
}

fn label(l: LabelArg) -> LabelSource {
    match l {
        LabelArg::Motif => LabelSource::Motif,
        LabelArg::Discord => LabelSource::Discord,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Features | Command::Profile => {
            let mode = if matches!(cli.command, Command::Features) {
                RunMode::Features
            } else {
                RunMode::Profile
            };
            let cfg = g.pipeline_config()?;
            let report = run_batch(g.input()?, &cfg, mode, g.out()?)?;
            let c = report.counts;
            println!(
                "{} files: {} ok, {} skipped (short), {} errors, {} non-audio; {:.2} s",
                c.scanned, c.ok, c.skipped_short, c.error, c.non_audio_skipped, report.wall_time_s
            );
            if c.ok == 0 {
                return Err(Error::EmptyInput(format!("no processable tracks under {}", g.input()?.display())).into());
            }
        }
        Command::Motifs { k } => {
            if k == 0 {
                bail!(Error::Argument("--k must be at least 1".into()));
            }
            let run = g.open_run(g.input()?)?;
            let rows = export_motifs(&run, k, g.out()?)?;
            println!("{} motifs from {} tracks", rows.len(), run.tracks.len());
        }
        Command::Triplets {
            profiles,
            batch_size,
            species_queue,
            augment,
        } => {
            let run = g.open_run(&profiles)?;
            let opts = TripletExportOptions {
                batch_size,
                batching: if species_queue {
                    TripletBatching::SpeciesQueue
                } else {
                    TripletBatching::Uniform
                },
                augment: augment.map(|a| match a {
                    AugmentArg::Embedding => AugmentConfig::embedding(),
                    AugmentArg::Classifier => AugmentConfig::classifier(),
                }),
                seed: g.seed_for(&run),
            };
            let s = export_triplets(g.input()?, &run, &opts, g.out()?)?;
            println!(
                "{} pairs -> {} triplets in {} batches ({} degenerate, {} dropped)",
                s.pairs, s.triplets, s.batches, s.degenerate, s.dropped
            );
        }
        Command::JoinFeatures {
            library_size,
            per_entry,
        } => {
            let run = g.open_run(g.input()?)?;
            let opts = JoinExportOptions {
                library_size,
                per_entry,
                seed: g.seed_for(&run),
            };
            let rows = export_join_features(&run, &opts, g.out()?)?;
            println!("{} windows x {} features", rows.values.nrows(), rows.values.ncols());
        }
        Command::PlotData => {
            let run = g.open_run(g.input()?)?;
            let n = export_plot_data(&run, g.out()?)?;
            println!("plot data for {n} tracks");
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        None => EXIT_USAGE,
        Some(e) => match e {
            Error::Argument(_) | Error::Config(_) => EXIT_USAGE,
            Error::EmptyInput(_) | Error::InsufficientDiversity(_) | Error::Size(_) | Error::NoMotif => {
                EXIT_NO_INPUT
            }
            _ => EXIT_IO,
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    info!("{:?}", cli.command);

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
