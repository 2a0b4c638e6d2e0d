use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use pdfp_langevin_cli::config::LoadedConfig;
use pdfp_langevin_cli::sample::Overrides;
use pdfp_langevin_cli::verify::{self, Suite};
use pdfp_langevin_cli::{experiment, sample};

#[derive(Parser)]
#[command(name = "pdfp-langevin", version, about = "Langevin sampling with inexact PDFP proximal steps")]
struct Cli {
    /// Overrides `sampler.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for `experiment-deblur`.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write the posterior mean and a diagnostics row.
    Sample { config: PathBuf },
    /// Run an invariant suite: prox, pdfp, bounds or samplers.
    Verify { suite: Suite },
    /// Run the sampler x K table on a deblurring model.
    ExperimentDeblur { config: PathBuf },
}

fn run(cli: Cli) -> Result<bool> {
    let ov = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Sample { config } => {
            let loaded = LoadedConfig::from_file(&config)?;
            let summary = sample::run(&loaded, &ov)?;
            let mut row = Vec::new();
            pdfp_langevin::diagnostics::DiagnosticsReport::write_header(&mut row)?;
            summary.report.write_row(&mut row)?;
            print!("{}", String::from_utf8(row)?);
            Ok(true)
        }
        Command::Verify { suite } => {
            let report = verify::run(suite);
            print!("{}", report.table());
            Ok(report.passed())
        }
        Command::ExperimentDeblur { config } => {
            let loaded = LoadedConfig::from_file(&config)?;
            experiment::run(&loaded, &ov, cli.threads)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
