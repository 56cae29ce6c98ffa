//! `hazesep` — dehazing pipeline driver.
//!
//! Subcommands: `synth` (dataset synthesis), `train` (score-model training),
//! `dehaze` (joint posterior sampling), `eval` (metric suite), `bmode`
//! (B-mode PNG export). All behavior is driven by a JSON config; every
//! command honors `--seed` and is byte-reproducible for identical inputs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric
//! failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hazesep_core::CoreError;

/// Config keys and their defaults, shown under every subcommand's --help.
const CONFIG_HELP: &str = "\
CONFIG KEYS (JSON; missing keys take these defaults, unknown keys are an error):
  seed                      42
  schedule.sigma            25.0      VE diffusion coefficient base, g(t) = sigma^t
  schedule.steps_t          200       reverse diffusion steps T
  schedule.tau              0.8       CCDF start time
  compand.mu                255.0     mu-law compression amount
  dehaze.lambda             0.5       data-consistency step size, signal chain
  dehaze.kappa              0.5       data-consistency step size, haze chain
  dehaze.gamma              1.0       haze amplitude in y = x + gamma*h
  dehaze.frozen_y_path      false     reuse one corruption noise path for y_hat
  dehaze.independent_init   false     CCDF-init h with its own noise draw
  patch.rows                128       patch height (axial)
  patch.cols                64        patch width (lateral)
  patch.overlap_fraction    0.10      overlap per axis, pixels = ceil(frac*dim)
  training.epochs           100
  training.batch_size       8
  training.learning_rate    1e-4
  training.t_min            0.01      DSM time-sampling floor
  training.augment          true      random flip + brightness offset
  training.arch             \"conv\"    \"conv\" or \"dense\"
  training.channels         8         conv channels
  training.layers           3         conv layers
  training.kernel           3         conv kernel (odd)
  training.hidden           [32,32]   dense hidden widths
  phantom.*                 synthetic tissue geometry (see README)
  haze.*                    synthetic haze structure (see README)
  paths.dataset_dir / checkpoint_dir / output_dir   optional path defaults";

#[derive(Parser)]
#[command(name = "hazesep", version, about = "Diffusion-based RF dehazing pipeline")]
struct Cli {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed override (otherwise the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker bound for patch-parallel sections; results are identical for
    /// any value. Defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset: clean/haze frames, mixed measurements,
    /// and companded training patches, with a manifest.
    #[command(after_help = CONFIG_HELP)]
    Synth {
        /// Number of frame pairs to generate.
        #[arg(long, default_value_t = 8)]
        frames: usize,
        /// Comma-separated haze levels for mixed measurements (may be empty).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        levels: Vec<f64>,
        /// Output dataset directory (default: paths.dataset_dir or ./dataset).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a score model on a synthesized dataset.
    #[command(after_help = CONFIG_HELP)]
    Train {
        /// Dataset directory containing manifest.json.
        #[arg(long)]
        dataset: PathBuf,
        /// Which prior to train: "tissue" or "haze".
        #[arg(long)]
        which: String,
        /// Checkpoint output path (default: <checkpoint_dir>/<which>.hsnet).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Separate a measurement into signal and haze estimates.
    #[command(after_help = CONFIG_HELP)]
    Dehaze {
        /// Measurement URF1 file.
        #[arg(long)]
        input: PathBuf,
        /// Signal-prior checkpoint (.hsnet).
        #[arg(long)]
        tissue: PathBuf,
        /// Haze-prior checkpoint (.hsnet).
        #[arg(long)]
        haze: PathBuf,
        /// Dehazed signal output (default: <output_dir>/x_hat.urf).
        #[arg(long)]
        out_x: Option<PathBuf>,
        /// Haze estimate output (default: <output_dir>/h_hat.urf).
        #[arg(long)]
        out_h: Option<PathBuf>,
        /// Per-step diagnostics CSV (step, t, residual, out-of-range counts).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Override dehaze.gamma from the config.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Evaluate dehazed outputs against clean references: PSNR, gCNR, KS,
    /// and lateral FWHM per frame plus per-level summaries.
    #[command(after_help = CONFIG_HELP)]
    Eval {
        /// Pairs manifest JSON.
        #[arg(long)]
        manifest: PathBuf,
        /// Metrics CSV output (default: <output_dir>/metrics.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert RF to a B-mode PNG (envelope, log compression, optional
    /// brightness matching).
    #[command(after_help = CONFIG_HELP)]
    Bmode {
        /// Input URF1 file.
        #[arg(long)]
        input: PathBuf,
        /// Output PNG path.
        #[arg(long)]
        output: PathBuf,
        /// Display dynamic range in dB.
        #[arg(long, default_value_t = 60.0)]
        dynamic_range: f64,
        /// Brightness-match against this reference RF file.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also write the dB grid as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::Io(_) => 3,
        CoreError::Numeric(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let config = match commands::load_run_config(cli.config.as_deref(), cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    let result = match cli.command {
        Command::Synth { frames, levels, out } => {
            commands::cmd_synth(&config, frames, &levels, out.as_deref())
        }
        Command::Train { dataset, which, out } => {
            commands::cmd_train(&config, &dataset, &which, out.as_deref())
        }
        Command::Dehaze {
            input,
            tissue,
            haze,
            out_x,
            out_h,
            diagnostics,
            gamma,
        } => commands::cmd_dehaze(
            &config,
            &input,
            &tissue,
            &haze,
            out_x.as_deref(),
            out_h.as_deref(),
            diagnostics.as_deref(),
            gamma,
            threads,
        ),
        Command::Eval { manifest, out } => commands::cmd_eval(&config, &manifest, out.as_deref()),
        Command::Bmode {
            input,
            output,
            dynamic_range,
            reference,
            csv,
        } => commands::cmd_bmode(
            &input,
            &output,
            dynamic_range,
            reference.as_deref(),
            csv.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
