mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Config, Overrides};
use geodiverse::Error;

/// Build geographically controlled satellite-imagery datasets and audit
/// their diversity.
#[derive(Parser, Debug)]
#[command(name = "geodiverse", version, about)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw points inside region polygons according to a group allocation
    Sample(commands::SampleArgs),
    /// Fetch, filter, normalise and store a tile per manifest sample
    Ingest(commands::IngestArgs),
    /// Compute diversity measures of a manifest or tile directory
    Audit(commands::AuditArgs),
    /// Rank datasets by downstream scores and correlate with diversity
    Analyze(commands::AnalyzeArgs),
}

/// 2: usage or configuration, 3: sampling saturation, 4: I/O.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Saturation { .. } => 3,
        Error::Io { .. } | Error::Raster(_) | Error::Fetch(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = Config::load(&cli.overrides).and_then(|cfg| match cli.command {
        Command::Sample(a) => commands::sample(&cfg, &a),
        Command::Ingest(a) => commands::ingest(&cfg, &a),
        Command::Audit(a) => commands::audit(&cfg, &a),
        Command::Analyze(a) => commands::analyze(&cfg, &a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
