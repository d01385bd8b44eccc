//! Command-line front end: phantom generation, slice datasets, training,
//! prediction, and evaluation.
//!
//! Exit codes: 0 success, 2 usage errors, 1 runtime errors.

mod args;
mod cmd_eval;
mod cmd_predict;
mod cmd_slice;
mod cmd_synth;
mod cmd_train;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{
    default_threads, parse_count_range, parse_dims, parse_float_range, PlaneArg, PrecisionArg,
    TaskArg,
};

#[derive(Parser)]
#[command(name = "triseg", about = "Tri-planar stroke lesion classification and segmentation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded phantom dataset with case-level splits.
    Synth {
        /// Output directory for volumes and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Number of cases to generate.
        #[arg(long)]
        count: usize,
        /// Volume dims as X,Y,Z.
        #[arg(long, value_parser = parse_dims, default_value = "32,32,32")]
        dims: (usize, usize, usize),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lesions per case, inclusive range LO..HI.
        #[arg(long, value_parser = parse_count_range, default_value = "1..2")]
        lesions: (usize, usize),
        /// Lesion semi-axis range in voxels, LO..HI.
        #[arg(long, value_parser = parse_float_range, default_value = "3..6")]
        radius: (f64, f64),
        /// Fraction of cases held out for 3D evaluation.
        #[arg(long, default_value_t = 0.2)]
        holdout3d: f64,
        /// Fraction of the remaining pool held out as 2D validation cases.
        #[arg(long, default_value_t = 0.2)]
        val2d: f64,
    },
    /// Tally slices per plane and optionally write a dataset entries file.
    Slice {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plane: Option<PlaneArg>,
        /// classify balances the classes; segment keeps lesion slices only.
        #[arg(long)]
        task: Option<TaskArg>,
        /// Entries file to write (requires --plane).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        balance_seed: u64,
    },
    /// Train one (plane, task) model from a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plane: PlaneArg,
        #[arg(long)]
        task: TaskArg,
        /// Directory receiving {plane}-{task}.ckpt/.arch.toml/.log.
        #[arg(long)]
        out_dir: PathBuf,
        /// Architecture file; without it a spec is built from --stage-channels.
        #[arg(long)]
        arch: Option<PathBuf>,
        /// Stage widths for the default architecture.
        #[arg(long, value_delimiter = ',', default_values_t = vec![16usize, 32, 64])]
        stage_channels: Vec<usize>,
        /// Defaults to 0.00001 for classify and 0.001 for segment.
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        patience: usize,
        #[arg(long, default_value_t = 0.0)]
        min_delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        balance_seed: u64,
        #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
        precision: PrecisionArg,
    },
    /// Run the six-model pipeline over one volume.
    Predict {
        #[arg(long)]
        volume: PathBuf,
        /// Directory holding the six {plane}-{task} checkpoints.
        #[arg(long)]
        models: PathBuf,
        /// Aggregated mask output; per-plane masks get -axial/-sagittal/-coronal suffixes.
        #[arg(long)]
        out: PathBuf,
        /// Run report file (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Plane votes required to accept a voxel (1-3).
        #[arg(long, default_value_t = 3)]
        vote_threshold: u8,
        /// Binarization threshold for segmenter probabilities.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Classifier gate threshold.
        #[arg(long, default_value_t = 0.5)]
        gate: f64,
        /// Positive pixels needed for a combined-classifier lesion label.
        #[arg(long, default_value_t = 1)]
        min_pixels: usize,
        /// Write only the per-plane masks.
        #[arg(long, default_value_t = false)]
        no_aggregate: bool,
        /// Worker threads (0 = default pool); TRISEG_THREADS sets the default.
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        #[arg(long, value_enum, default_value_t = PrecisionArg::F32)]
        precision: PrecisionArg,
    },
    /// Compare predicted masks against ground truth.
    Eval {
        /// Aggregated prediction mask(s), one per case.
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        /// Ground-truth mask(s), matching --pred.
        #[arg(long, required = true)]
        truth: Vec<PathBuf>,
        /// Per-plane masks for the without-aggregation section.
        #[arg(long)]
        pred_axial: Vec<PathBuf>,
        #[arg(long)]
        pred_sagittal: Vec<PathBuf>,
        #[arg(long)]
        pred_coronal: Vec<PathBuf>,
        /// Machine-readable metric records (TSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> triseg_core::Result<()> {
    match cli.command {
        Command::Synth { out, count, dims, seed, lesions, radius, holdout3d, val2d } => {
            cmd_synth::run(&cmd_synth::SynthConfig {
                out,
                count,
                dims,
                seed,
                lesions,
                radius,
                holdout3d,
                val2d,
            })
        }
        Command::Slice { manifest, plane, task, out, balance_seed } => {
            cmd_slice::run(&cmd_slice::SliceConfig {
                manifest,
                plane: plane.map(Into::into),
                task,
                out,
                balance_seed,
            })
        }
        Command::Train {
            manifest,
            plane,
            task,
            out_dir,
            arch,
            stage_channels,
            lr,
            batch_size,
            epochs,
            patience,
            min_delta,
            seed,
            balance_seed,
            precision,
        } => {
            let cfg = cmd_train::TrainConfig {
                manifest,
                plane: plane.into(),
                task,
                out_dir,
                arch,
                stage_channels,
                learning_rate: lr,
                batch_size,
                epochs,
                patience,
                min_delta,
                seed,
                balance_seed,
            };
            match precision {
                PrecisionArg::F32 => cmd_train::run::<f32>(&cfg),
                PrecisionArg::F64 => cmd_train::run::<f64>(&cfg),
            }
        }
        Command::Predict {
            volume,
            models,
            out,
            report,
            vote_threshold,
            tau,
            gate,
            min_pixels,
            no_aggregate,
            threads,
            precision,
        } => {
            let cfg = cmd_predict::PredictConfig {
                volume,
                models,
                out,
                report,
                vote_threshold,
                tau,
                gate,
                min_pixels,
                no_aggregate,
                threads,
            };
            match precision {
                PrecisionArg::F32 => cmd_predict::run::<f32>(&cfg),
                PrecisionArg::F64 => cmd_predict::run::<f64>(&cfg),
            }
        }
        Command::Eval { pred, truth, pred_axial, pred_sagittal, pred_coronal, out } => {
            cmd_eval::run(&cmd_eval::EvalConfig {
                pred,
                truth,
                pred_axial,
                pred_sagittal,
                pred_coronal,
                out,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
