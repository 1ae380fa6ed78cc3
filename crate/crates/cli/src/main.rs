//! `elastic run <workload>`: runs one workload on one executor configuration
//! and writes its trace, billing ledger and reports.

// `!(x >= 0.0)` is the NaN-rejecting form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_config, Overrides, RunConfig, WorkloadKind};

#[derive(Debug, Parser)]
#[command(
    name = "elastic",
    version,
    about = "Elastic execution of irregular workloads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a workload and write its artifacts.
    Run {
        #[arg(value_enum)]
        workload: Option<WorkloadKind>,
        /// TOML config file; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print report.json to standard output.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let Command::Run {
        workload,
        config,
        json,
        overrides,
    } = cli.command;
    let mut cfg = match config {
        Some(path) => match load_config(&path) {
            Ok(c) => c,
            Err(e) => return fail(1, &e),
        },
        None => RunConfig::default(),
    };
    if let Err(e) = cfg.apply(workload, &overrides) {
        return fail(1, &e);
    }
    match run::run(&cfg) {
        Ok(summary) => {
            if json {
                println!("{}", summary.report_json);
            } else {
                eprintln!(
                    "wrote artifacts to {}{}",
                    cfg.run.output_dir.display(),
                    match summary.verified {
                        Some(true) => " (oracle check passed)",
                        _ => "",
                    }
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code(), &e),
    }
}

fn fail(code: u8, e: &dyn std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}
