use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use slipflow::commands::{run_command, Command};
use slipflow::config::parse_config;

/// Steady compressible slip flow in a periodic channel.
#[derive(Parser, Debug)]
#[command(name = "slipflow", version)]
struct Cli {
    /// check-assumption, solve, verify, residuals or sweep-epsilon
    #[arg(value_parser = parse_command)]
    command: Command,

    /// Configuration file of `section.key = value` lines
    #[arg(long)]
    config: PathBuf,

    /// Output directory; defaults to `output.dir` of the config
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_command(s: &str) -> Result<Command, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    if let Ok(v) = std::env::var("NSF_THREADS") {
        match v.trim().parse() {
            Ok(n) => config.threads = n,
            Err(_) => {
                eprintln!("error: NSF_THREADS must be a nonnegative integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    let out = cli.out.unwrap_or_else(|| config.output.dir.clone());
    let outcome = run_command(cli.command, &config, &out);
    let status = outcome.report.get("status").unwrap_or("failed");
    println!("{} {status}: {}", cli.command, outcome.report_path.display());
    if let Some(e) = outcome.report.get("error") {
        eprintln!("error: {e}");
    }
    ExitCode::from(outcome.exit_code as u8)
}
