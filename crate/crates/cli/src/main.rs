//! `idtrace`: identity tracing from the command line.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::error::{CliError, EXIT_USAGE};
use crate::output::Format;

/// Seed used by randomized commands when none is given.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Parser)]
#[command(
    name = "idtrace",
    version,
    about = "Identity entropy, core identification sets and attribute tracing"
)]
struct Cli {
    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// More diagnostics on stderr; repeat for debug output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a CSV table and write the binary index.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Object and attribute counts with per-attribute entropy.
    Stats {
        /// CSV file or binary index.
        dataset: PathBuf,
        /// Only report these attributes.
        #[arg(long = "attr", value_delimiter = ',')]
        attrs: Vec<String>,
        /// Condition on `attribute=value` pairs.
        #[arg(long, value_delimiter = ',')]
        known: Vec<String>,
    },
    /// Core identification sets of one object.
    Coreset {
        dataset: PathBuf,
        #[arg(long)]
        object: String,
        /// Narrow the search space by `attribute=value` pairs first.
        #[arg(long, value_delimiter = ',')]
        known: Vec<String>,
        /// List every core set instead of the greedy one.
        #[arg(long)]
        enumerate: bool,
        /// Largest set size searched by `--enumerate`.
        #[arg(long, requires = "enumerate")]
        max_size: Option<usize>,
        /// Judge minimality against every object in the search space.
        #[arg(long)]
        strict: bool,
    },
    /// Trace an object by acquiring attributes one at a time.
    Trace(commands::trace::TraceArgs),
    /// Run the benchmark experiments and write tables, charts and metadata.
    Bench {
        /// JSON config; all experiments with defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write a synthetic population table as CSV.
    Generate(commands::data::GenerateArgs),
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "IDTRACE_ADDR", default_value = "127.0.0.1:8080")]
    addr: String,
    #[arg(long, env = "IDTRACE_DATA_DIR", default_value = "idtrace-data")]
    data_dir: PathBuf,
    /// Sessions with at most this many candidates list their rows.
    #[arg(long, env = "IDTRACE_DISPLAY_THRESHOLD", default_value_t = idtrace_service::DEFAULT_DISPLAY_THRESHOLD)]
    display_threshold: usize,
    /// Directory of static files served outside `/v1`.
    #[arg(long, env = "IDTRACE_STATIC_DIR")]
    static_dir: Option<PathBuf>,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let format = cli.format;
    match cli.command {
        Command::Ingest { csv, out } => commands::data::ingest(&csv, &out, format),
        Command::Stats {
            dataset,
            attrs,
            known,
        } => commands::data::stats(&dataset, &attrs, &known, format),
        Command::Coreset {
            dataset,
            object,
            known,
            enumerate,
            max_size,
            strict,
        } => commands::coreset::run(
            &dataset, &object, &known, enumerate, max_size, strict, format,
        ),
        Command::Trace(args) => commands::trace::run(&args, format),
        Command::Bench { config, out, seed } => {
            commands::bench::run(config.as_deref(), &out, seed, format)
        }
        Command::Serve(args) => commands::serve::run(
            &args.addr,
            &args.data_dir,
            args.display_threshold,
            args.static_dir,
            format,
        ),
        Command::Generate(args) => commands::data::generate(&args, format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
