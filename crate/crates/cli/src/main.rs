mod commands;
mod config;
mod plot;
mod staging;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use staging::Staging;

/// Missing or inconsistent arguments that clap cannot check on its own.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Debug, Parser)]
#[command(
    name = "headrot",
    version,
    about = "Synthetic head-rotation traces: preprocessing, TimeGAN, FFT baseline and metrics"
)]
struct Cli {
    /// Run configuration (JSON); flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Trace CSV files or directories of them.
    #[arg(long, num_args = 1..)]
    traces: Vec<PathBuf>,
    #[arg(long)]
    rate_hz: Option<f64>,
    #[arg(long)]
    downsample_factor: Option<usize>,
    #[arg(long)]
    window_len: Option<usize>,
    #[arg(long)]
    window_stride: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut traces into windows and fit the quantile transform.
    Preprocess {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long)]
        quantile_count: Option<usize>,
    },
    /// Train TimeGAN on preprocessed windows, snapshotting during the joint phase.
    Train {
        /// Output directory of `preprocess`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        epochs_embedding: Option<usize>,
        #[arg(long)]
        epochs_supervised: Option<usize>,
        #[arg(long)]
        epochs_joint: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        snapshot_every: Option<usize>,
        /// Also discriminate latents before the supervisor.
        #[arg(long)]
        three_stream: bool,
    },
    /// Generate windows in degrees from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Number of windows; defaults to ten times the training set.
        #[arg(long, short = 'n')]
        count: Option<usize>,
    },
    /// Fit the mean PSD and synthesize random-phase baseline windows.
    Baseline {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long)]
        n_traces: Option<usize>,
        #[arg(long)]
        trace_len: Option<usize>,
    },
    /// Compare synthetic window sets against the real one.
    Evaluate {
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        synthetic: Vec<PathBuf>,
        /// One label per synthetic set.
        #[arg(long, num_args = 1..)]
        label: Vec<String>,
        #[arg(long)]
        bucket_width: Option<f64>,
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// Score every snapshot in an archive and pick the best.
    SelectSnapshot {
        #[arg(long)]
        archive: Option<PathBuf>,
        #[arg(long)]
        real: Option<PathBuf>,
    },
    /// Spline reconstruction error after downsampling, per factor.
    DownsampleAnalysis {
        #[command(flatten)]
        traces: TraceArgs,
        #[arg(long, value_delimiter = ',')]
        factors: Vec<usize>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_trace_args(cfg: &mut RunConfig, args: TraceArgs) {
    if !args.traces.is_empty() {
        cfg.traces = args.traces;
    }
    set(&mut cfg.rate_hz, args.rate_hz);
    set(&mut cfg.preprocess.downsample_factor, args.downsample_factor);
    set(&mut cfg.preprocess.window_len, args.window_len);
    set(&mut cfg.preprocess.window_stride, args.window_stride);
}

/// Folds command-line flags into the configuration.
fn apply(cfg: &mut RunConfig, command: Command) {
    match command {
        Command::Preprocess {
            traces,
            quantile_count,
        } => {
            apply_trace_args(cfg, traces);
            set(&mut cfg.preprocess.quantile_count, quantile_count);
        }
        Command::Train {
            data,
            resume,
            epochs_embedding,
            epochs_supervised,
            epochs_joint,
            batch_size,
            snapshot_every,
            three_stream,
        } => {
            if data.is_some() {
                cfg.data = data;
            }
            if resume.is_some() {
                cfg.resume = resume;
            }
            let s = &mut cfg.schedule;
            set(&mut s.epochs_embedding, epochs_embedding);
            set(&mut s.epochs_supervised, epochs_supervised);
            set(&mut s.epochs_joint, epochs_joint);
            set(&mut s.batch_size, batch_size);
            set(&mut s.snapshot_every, snapshot_every);
            cfg.model.three_stream |= three_stream;
        }
        Command::Generate { checkpoint, count } => {
            if checkpoint.is_some() {
                cfg.checkpoint = checkpoint;
            }
            if count.is_some() {
                cfg.count = count;
            }
        }
        Command::Baseline {
            traces,
            n_traces,
            trace_len,
        } => {
            apply_trace_args(cfg, traces);
            if n_traces.is_some() {
                cfg.baseline.n_traces = n_traces;
            }
            set(&mut cfg.baseline.trace_len, trace_len);
        }
        Command::Evaluate {
            real,
            synthetic,
            label,
            bucket_width,
            max_lag,
        } => {
            if real.is_some() {
                cfg.real = real;
            }
            if !synthetic.is_empty() {
                cfg.synthetic = synthetic;
            }
            if !label.is_empty() {
                cfg.labels = label;
            }
            set(&mut cfg.metrics.bucket_width, bucket_width);
            set(&mut cfg.metrics.max_lag, max_lag);
        }
        Command::SelectSnapshot { archive, real } => {
            if archive.is_some() {
                cfg.archive = archive;
            }
            if real.is_some() {
                cfg.real = real;
            }
        }
        Command::DownsampleAnalysis { traces, factors } => {
            apply_trace_args(cfg, traces);
            if !factors.is_empty() {
                cfg.analysis_factors = factors;
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Verb {
    Preprocess,
    Train,
    Generate,
    Baseline,
    Evaluate,
    SelectSnapshot,
    DownsampleAnalysis,
}

impl From<&Command> for Verb {
    fn from(c: &Command) -> Self {
        match c {
            Command::Preprocess { .. } => Verb::Preprocess,
            Command::Train { .. } => Verb::Train,
            Command::Generate { .. } => Verb::Generate,
            Command::Baseline { .. } => Verb::Baseline,
            Command::Evaluate { .. } => Verb::Evaluate,
            Command::SelectSnapshot { .. } => Verb::SelectSnapshot,
            Command::DownsampleAnalysis { .. } => Verb::DownsampleAnalysis,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| UsageError(format!("{e:#}")))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    let verb = Verb::from(&cli.command);
    apply(&mut cfg, cli.command);
    // One seed drives training as well as generation.
    cfg.schedule.seed = cfg.seed;

    let out = cfg
        .out
        .clone()
        .ok_or_else(|| UsageError("missing output directory (--out)".into()))?;
    let stage = Staging::begin(&out)?;
    match verb {
        Verb::Preprocess => commands::preprocess(&cfg, stage.path())?,
        Verb::Train => commands::train(&cfg, &stage)?,
        Verb::Generate => commands::generate_windows(&cfg, stage.path())?,
        Verb::Baseline => commands::baseline(&cfg, stage.path())?,
        Verb::Evaluate => commands::evaluate(&cfg, stage.path())?,
        Verb::SelectSnapshot => commands::select(&cfg, stage.path())?,
        Verb::DownsampleAnalysis => commands::downsample_analysis(&cfg, stage.path())?,
    }
    cfg.save(stage.path())?;
    stage.commit()?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

/// 2 for bad inputs or usage, 1 for failures of the pipeline itself.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<headrot::Error>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<UsageError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    headrot::nn::retain_freed_memory();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
