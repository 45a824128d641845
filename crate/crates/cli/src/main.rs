use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use emolink::evaluation::ReportFormat;
use emolink::exec::Execution;
use emolink::pipeline::{Pipeline, RunConfig, Stage};

/// Link users across recommender datasets by emotion profile and
/// recommend through the links.
#[derive(Parser)]
#[command(name = "emolink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse input files, write id maps and reject reports
    Ingest(RunArgs),
    /// Build item emotion profiles
    Classify(RunArgs),
    /// Build user and group profiles
    Profile(RunArgs),
    /// Link probe users to pool users and groups
    Pac(RunArgs),
    /// Write per-user recommendation lists
    Recommend(RunArgs),
    /// Write hit-rate reports over a held-out split
    Evaluate(RunArgs),
    /// Run every stage and write all artifacts
    Pipeline(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Similarity threshold for group links, in (0, 1]
    #[arg(long)]
    tau: Option<f64>,
    /// Length of every recommendation list
    #[arg(long)]
    top_n: Option<usize>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Run on one thread
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Text,
}

impl Command {
    fn split(self) -> (Stage, RunArgs) {
        match self {
            Command::Ingest(a) => (Stage::Ingest, a),
            Command::Classify(a) => (Stage::Classify, a),
            Command::Profile(a) => (Stage::Profile, a),
            Command::Pac(a) => (Stage::Pac, a),
            Command::Recommend(a) => (Stage::Recommend, a),
            Command::Evaluate(a) => (Stage::Evaluate, a),
            Command::Pipeline(a) => (Stage::Pipeline, a),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (stage, args) = cli.command.split();
    let mut config = RunConfig::load(&args.config)?;
    // flags win over the file
    if let Some(tau) = args.tau {
        config.tau = tau;
    }
    if let Some(n) = args.top_n {
        config.top_n = n;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if let Some(f) = args.format {
        config.format = match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Text => ReportFormat::Text,
        };
    }
    let exec = if args.sequential { Execution::Sequential } else { Execution::default() };
    let pipeline = Pipeline::new(config)?.with_execution(exec);
    let summary = pipeline.run(stage).with_context(|| format!("{stage} failed"))?;
    log::info!(
        "{stage}: wrote {} artifacts under {}",
        summary.artifacts.len(),
        pipeline.config().output_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EMOLINK_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
