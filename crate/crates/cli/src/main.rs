use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use harnack_lab_cli::config::{Format, RunConfig};
use harnack_lab_cli::error::CliError;

/// Verify space-time connection and Harnack identities on exact Ricci flows.
#[derive(Debug, Parser)]
#[command(name = "harnack-lab", version)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Suite to run; repeatable, replaces the configured list.
    #[arg(long = "suite")]
    suites: Vec<String>,
    /// Override the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report and sweep CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn execute(args: Args) -> Result<bool, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if !args.suites.is_empty() {
        cfg.suites = args.suites;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output.dir = Some(out);
    }
    if let Some(format) = args.format {
        cfg.output.format = format;
    }
    let report = harnack_lab_cli::run(&cfg)?;
    match (&cfg.output.dir, cfg.output.format) {
        (Some(dir), format) => {
            report.write(dir, format)?;
            print!("{}", report.summary());
        }
        (None, Format::Json) => {
            print!("{}", report.to_json());
            eprint!("{}", report.summary());
        }
        (None, Format::Text) => print!("{}", report.summary()),
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
