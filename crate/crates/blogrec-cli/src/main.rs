//! Experiment runner for the blogrec toolkit.
//!
//! One invocation runs one command and writes its artifacts into `--out`,
//! always including a `manifest.json` that echoes the effective
//! configuration, the seed, and checksums of every input file. Given equal
//! flags and inputs, every artifact is byte-identical across runs.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 training divergence.

use clap::Parser;

mod commands;
mod error;
mod manifest;

use commands::{evaluate, ingest, stats, synth, train};

#[derive(Parser, Debug)]
#[command(name = "blogrec", version, about = "Blog recommendation experiments")]
enum Cli {
    /// Generate a synthetic follow/app corpus with planted topic structure
    Synth(synth::SynthArgs),
    /// Normalize raw TSV logs into canonical vocabularies and matrix dumps
    Ingest(ingest::IngestArgs),
    /// Degree histograms and an app/blog co-audience heatmap
    Stats(stats::StatsArgs),
    /// Train a factorization model on a full corpus and save it
    Train(train::TrainArgs),
    /// Split a corpus, score it with one or more models, and report metrics
    Evaluate(evaluate::EvaluateArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match cli {
        Cli::Synth(args) => synth::run(args),
        Cli::Ingest(args) => ingest::run(args),
        Cli::Stats(args) => stats::run(args),
        Cli::Train(args) => train::run(args),
        Cli::Evaluate(args) => evaluate::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
