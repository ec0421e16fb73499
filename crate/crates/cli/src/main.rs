mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, CONFIG_ENV};

/// Gaze-direction pipeline: cascade detection, pair-eye datasets, CNN
/// training and evaluation, and session scoring.
///
/// Exit status: 0 success, 2 unreadable or invalid input, 3 malformed file,
/// 4 training diverged.
#[derive(Debug, Parser)]
#[command(name = "gaze", version)]
struct Cli {
    /// key = value configuration file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print face and eye boxes (or the rejection reason) for each frame.
    Detect {
        #[command(flatten)]
        cascades: CascadeArgs,
        /// PNM image or concatenated frame stream; `-` reads standard input.
        #[arg(default_value = "-")]
        input: PathBuf,
    },
    /// Build, expand, generate and split pair-eye datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the reference network and write its weights.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Held-out dataset scored every `val-every` iterations.
        #[arg(long)]
        val_data: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        /// Output weight file.
        #[arg(long)]
        out: PathBuf,
        /// Per-iteration loss log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of trained weights on a dataset.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Person-disjoint k-fold cross-validation.
    Kfold {
        #[command(flatten)]
        data: DataArgs,
        /// Number of folds.
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a frame stream and print the session report.
    Infer {
        #[command(flatten)]
        cascades: CascadeArgs,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Output classes of the weights (2 or 3).
        #[arg(long)]
        classes: Option<usize>,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Also write per-frame records (JSON lines) here.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Plain-text summary instead of JSON.
        #[arg(long)]
        text: bool,
        /// Concatenated PNM frame stream; `-` reads standard input.
        #[arg(default_value = "-")]
        input: PathBuf,
    },
    /// Time the infer-mode forward pass (and optionally the whole per-frame pipeline).
    Bench {
        /// Weights to time; a freshly initialized network when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
        /// Frame for the full-pipeline timing (needs the cascades).
        #[arg(long)]
        frame: Option<PathBuf>,
        #[command(flatten)]
        cascades: CascadeArgs,
    },
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Cut pair-eye images out of a frame stream into a dataset directory.
    Compose {
        #[command(flatten)]
        cascades: CascadeArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Class of every accepted frame (0 right, 1 left, 2 undetermined).
        #[arg(long)]
        label: u8,
        #[arg(long)]
        person: String,
        /// adult, child or synthetic.
        #[arg(long, default_value = "adult")]
        source: String,
        /// Scene shown on the viewer's right (class 0), for a new manifest.
        #[arg(long, default_value = "right scene")]
        scene0: String,
        /// Scene shown on the viewer's left (class 1), for a new manifest.
        #[arg(long, default_value = "left scene")]
        scene1: String,
        /// Dataset directory; an existing manifest there is extended.
        #[arg(long)]
        out: PathBuf,
        #[arg(default_value = "-")]
        input: PathBuf,
    },
    /// Expand every sample into its 15 shifted and rotated variants.
    Augment {
        #[command(flatten)]
        data: DataOnly,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic pair-eye dataset.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        persons: usize,
        /// Class fractions, comma separated.
        #[arg(long, default_value = "0.34,0.33,0.33")]
        mix: String,
        /// Large pupil offsets and no noise.
        #[arg(long)]
        easy: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign persons to k folds and write the plan.
    Split {
        #[command(flatten)]
        data: DataOnly,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct CascadeArgs {
    /// LBP face cascade (OpenCV XML).
    #[arg(long = "face")]
    face_cascade: Option<PathBuf>,
    /// Haar eye cascade (OpenCV XML).
    #[arg(long = "eyes")]
    eye_cascade: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SamplerArgs {
    /// Leading frames to drop.
    #[arg(long)]
    skip: Option<usize>,
    /// Keep every Nth frame.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Debug, Args)]
struct DataOnly {
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// 3, or 2 to drop the undetermined class.
    #[arg(long)]
    classes: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Learning-rate multiplier applied every `lr-step` iterations.
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    lr_step: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    val_every: Option<usize>,
    /// Worker threads per batch; 1 gives bit-reproducible runs.
    #[arg(long)]
    lanes: Option<usize>,
}

impl CascadeArgs {
    fn config(&self) -> Config {
        Config {
            face_cascade: self.face_cascade.clone(),
            eye_cascade: self.eye_cascade.clone(),
            ..Config::default()
        }
    }
}

impl SamplerArgs {
    fn config(&self) -> Config {
        Config { skip: self.skip, stride: self.stride, ..Config::default() }
    }
}

impl DataArgs {
    fn config(&self) -> Config {
        Config { data: self.data.clone(), classes: self.classes, ..Config::default() }
    }
}

impl TrainArgs {
    fn config(&self) -> Config {
        Config {
            iterations: self.iterations,
            batch: self.batch,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            lr_decay: self.lr_decay,
            lr_step: self.lr_step,
            dropout: self.dropout,
            seed: self.seed,
            val_every: self.val_every,
            lanes: self.lanes,
            ..Config::default()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gaze: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
