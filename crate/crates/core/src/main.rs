//! `plap`: run a p-Laplacian criticality experiment described by a TOML file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use plap::cli::{run_file, ExitStatus, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "plap",
    version,
    about = "Radial p-Laplacian criticality and minimal-growth experiments"
)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed for randomized validation batteries (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config; default `plap-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Solver residual tolerance (overrides the config).
    #[arg(long)]
    tol: Option<f64>,
    /// Number of exhaustion levels (overrides the config).
    #[arg(long)]
    levels: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let ov = Overrides {
        seed: args.seed,
        out: args.out,
        tol: args.tol,
        levels: args.levels,
    };
    match run_file(&args.config, &ov) {
        Ok(outcome) => {
            let status = outcome.report["status"].as_str().unwrap_or("?");
            println!(
                "{}: {status}",
                outcome.report["command"].as_str().unwrap_or("?")
            );
            if let Some(err) = outcome.report.get("error").and_then(|e| e.as_str()) {
                eprintln!("error: {err}");
            }
            for f in &outcome.files {
                println!("  wrote {}", f.display());
            }
            ExitCode::from(outcome.status.code())
        }
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            ExitCode::from(ExitStatus::for_error(&e).code())
        }
    }
}
