//! `poprec`: popularity-aware recommendation experiments from the command
//! line.
//!
//! Every subcommand is driven by a flat `key=value` config file (see the
//! README for the key reference); a few flags override the most common
//! settings. Exit codes: 0 on success, 1 for validation errors, 2 for
//! runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use poprec_core::experiment::{
    drift_emit, evaluate_emit, fairness_emit, forecast_emit, grid_search, ingest_emit, run,
    stats_emit, synth_emit, train_emit, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "poprec", version, about = "Popularity-aware causal recommendation experiments")]
struct Cli {
    /// Experiment config file (flat key=value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the root random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-user evaluation fan-out (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogBase {
    /// Natural logarithm (drift in nats, bound ln 2).
    E,
    /// Base-2 logarithm (drift in bits, bound 1).
    #[value(name = "2")]
    Two,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter and densely re-index an interaction log.
    Ingest {
        /// Input TSV/CSV path (overrides data.path).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Write per-stage popularity and per-item quality statistics.
    Stats,
    /// Write the popularity drift series.
    Drift {
        #[arg(long, value_enum, default_value = "e")]
        log_base: LogBase,
    },
    /// Write the next-stage popularity forecast.
    Forecast {
        /// Drift strength (overrides forecast.alpha).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Train the configured model and store checkpoints.
    Train,
    /// Evaluate stored checkpoints against the test partition.
    Evaluate,
    /// Compute the exposure fairness report from stored checkpoints.
    Fairness,
    /// Generate a synthetic interaction log with ground-truth sidecars.
    Synth,
    /// Run the full pipeline and write all artifacts.
    Run,
    /// Exhaustive hyper-parameter grid search.
    Grid,
}

fn load_config(cli: &Cli) -> poprec_core::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> poprec_core::Result<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Ingest { input } => {
            if let Some(path) = input {
                cfg.data.path = path.clone();
            }
            ingest_emit(&cfg)?;
            eprintln!("wrote {}", cfg.out.join("log.tsv").display());
        }
        Command::Stats => {
            stats_emit(&cfg)?;
            eprintln!("wrote {}", cfg.out.join("popularity.csv").display());
        }
        Command::Drift { log_base } => {
            drift_emit(&cfg, matches!(log_base, LogBase::Two))?;
            eprintln!("wrote {}", cfg.out.join("drift.csv").display());
        }
        Command::Forecast { alpha } => {
            if let Some(a) = alpha {
                cfg.forecast_alpha = *a;
            }
            forecast_emit(&cfg)?;
            eprintln!("wrote {}", cfg.out.join("forecast.tsv").display());
        }
        Command::Train => {
            train_emit(&cfg)?;
            eprintln!("wrote {}", cfg.out.join("trace.csv").display());
        }
        Command::Evaluate => {
            let rows = evaluate_emit(&cfg)?;
            for (metric, k, value) in rows {
                println!("{metric}@{k} = {value:.6}");
            }
        }
        Command::Fairness => {
            let (d_r, d_l) = fairness_emit(&cfg)?;
            println!("mean_d_r = {d_r:.6}");
            println!("mean_d_l = {d_l:.6}");
        }
        Command::Synth => {
            let path = synth_emit(&cfg)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Run => {
            let artifacts = run(&cfg)?;
            for (metric, k, value) in &artifacts.metrics {
                println!("{metric}@{k} = {value:.6}");
            }
            if let Some((d_r, d_l)) = artifacts.fairness {
                println!("mean_d_r = {d_r:.6}");
                println!("mean_d_l = {d_l:.6}");
            }
            eprintln!("artifacts in {}", artifacts.out_dir.display());
        }
        Command::Grid => {
            let (rows, best) = grid_search(&cfg)?;
            for (idx, row) in rows.iter().enumerate() {
                let marker = if idx == best { " <- best" } else { "" };
                println!(
                    "gamma={} alpha={} gamma_r={} gamma_z={} val={:.6}{marker}",
                    row.gamma, row.alpha, row.gamma_r, row.gamma_z, row.val_metric
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
