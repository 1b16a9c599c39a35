use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use domain_stability::cli::{exit_code, merge_runs, run, write_atomic, Overrides, ReportOptions, RunConfig};

#[derive(Parser)]
#[command(name = "domain-stability", version, about = "Domain perturbation experiments for Dirichlet problems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one JSON config (or a run manifest) into an output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Repeat sweeps on the grid refined twice.
        #[arg(long)]
        resolution_check: bool,
    },
    /// Merge results of compatible run directories into one CSV.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_mixed_grids: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run { config, out, seed, resolution_check } => RunConfig::load(&config).and_then(|mut c| {
            c.apply(&Overrides { out, seed, resolution_check });
            let outcome = run(&c)?;
            println!("{}", outcome.dir.display());
            for f in &outcome.files {
                println!("  {f}");
            }
            Ok(())
        }),
        Cmd::Report { runs, out, allow_mixed_grids } => {
            merge_runs(&runs, &ReportOptions { allow_mixed_grids }).and_then(|bytes| write_atomic(&out, &bytes))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.name());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
