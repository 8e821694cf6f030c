//! `disent` — train and evaluate attribute-hiding embedding models.
//!
//! Every command reads one JSON experiment config (flags override file
//! values), echoes the fully resolved config into its output directory
//! before computing, and exits 0 only if all requested artifacts were
//! written. Failures print a machine-readable error JSON to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonOpts;
use disent_core::Error;

#[derive(Parser)]
#[command(
    name = "disent",
    version,
    about = "Train encoders whose embeddings keep the main label and hide the sensitive one"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the synthetic dataset into train/test/aux CSVs plus a manifest.
    Generate(CommonOpts),
    /// Run one training job: records.jsonl, checkpoints, summary.json.
    Train(CommonOpts),
    /// Train across a λ grid (one subdirectory per run) and aggregate a CSV.
    Sweep(CommonOpts),
    /// Probe a finished run's final checkpoint and write probe_report.json.
    Evaluate {
        /// Run directory produced by `train` or a `sweep` subdirectory.
        run_dir: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Correlate recorded regularizer values with per-checkpoint probe
    /// accuracy across a run's checkpoints.
    Correlate {
        /// Run directory produced by `train` or a `sweep` subdirectory.
        run_dir: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Encode a CSV dataset with a checkpoint and export the embeddings.
    ExportEmbeddings {
        /// Checkpoint file to load the encoder from.
        checkpoint: PathBuf,
        /// Input CSV in the `f0..f{d-1},y,s` dialect.
        data: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::ShapeMismatch { .. } => "shape_mismatch",
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::InsufficientSamples { .. } => "insufficient_samples",
        Error::SingleClassBatch => "single_class_batch",
        Error::UndefinedCorrelation { .. } => "undefined_correlation",
        Error::DataBalance { .. } => "data_balance",
        Error::CsvParse { .. } => "csv_parse",
        Error::EmptyBatch { .. } => "empty_batch",
        Error::Config(_) => "config",
        Error::Checkpoint(_) => "checkpoint",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn emit_error(kind: &str, message: &str) {
    let body = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if err.use_stderr() {
                emit_error("usage", &err.to_string());
                return ExitCode::from(2);
            }
            // --help / --version go to stdout and exit cleanly.
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };

    let result = match &cli.command {
        Command::Generate(opts) => commands::cmd_generate(opts),
        Command::Train(opts) => commands::cmd_train(opts),
        Command::Sweep(opts) => commands::cmd_sweep(opts),
        Command::Evaluate { run_dir, opts } => commands::cmd_evaluate(run_dir, opts),
        Command::Correlate { run_dir, opts } => commands::cmd_correlate(run_dir, opts),
        Command::ExportEmbeddings {
            checkpoint,
            data,
            opts,
        } => commands::cmd_export_embeddings(checkpoint, data, opts),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            emit_error(error_kind(&err), &err.to_string());
            ExitCode::FAILURE
        }
    }
}
