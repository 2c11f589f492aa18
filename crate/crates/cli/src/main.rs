mod commands;
mod config;
mod document;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Lattice, SimulateInput, SweepInput};
use config::{CommonArgs, RunConfig};
use error::CliError;

/// Locally optimal group testing designs with unknown sensitivity and specificity.
#[derive(Debug, Parser)]
#[command(name = "gtdesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the optimal approximate design and its rounded exact design
    Design {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Round the approximate design of a design file to --n trials
    Round {
        #[arg(long)]
        design: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Equivalence-theorem check of the approximate design in a design file
    Verify {
        #[arg(long)]
        design: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Simulated D- and Ds-efficiencies of an exact design
    Simulate {
        #[arg(long)]
        design: Option<PathBuf>,
        /// Exact design group sizes, instead of --design
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<u64>>,
        /// Trials at each of --sizes
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<u64>>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Misspecification sweep: one row per guessed parameter vector
    Sweep {
        #[arg(long, value_enum)]
        lattice: Option<Lattice>,
        #[arg(long, value_delimiter = ',')]
        tilde_p0: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        tilde_p1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        tilde_p2: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design { common } => {
            let cfg = RunConfig::resolve(&common)?;
            commands::emit(&commands::cmd_design(&cfg)?, cfg.out.as_deref())
        }
        Command::Round { design, common } => {
            let cfg = RunConfig::resolve(&common)?;
            commands::emit(&commands::cmd_round(&cfg, design)?, cfg.out.as_deref())
        }
        Command::Verify { design, common } => {
            let cfg = RunConfig::resolve(&common)?;
            let (text, certified) = commands::cmd_verify(&cfg, design)?;
            commands::emit(&text, cfg.out.as_deref())?;
            if certified {
                Ok(())
            } else {
                Err(commands::not_optimal())
            }
        }
        Command::Simulate {
            design,
            sizes,
            counts,
            common,
        } => {
            let cfg = RunConfig::resolve(&common)?;
            let input = SimulateInput {
                design,
                sizes,
                counts,
            };
            commands::emit(&commands::cmd_simulate(&cfg, input)?, cfg.out.as_deref())
        }
        Command::Sweep {
            lattice,
            tilde_p0,
            tilde_p1,
            tilde_p2,
            common,
        } => {
            let cfg = RunConfig::resolve(&common)?;
            let input = SweepInput {
                lattice,
                tilde_p0,
                tilde_p1,
                tilde_p2,
            };
            commands::emit(&commands::cmd_sweep(&cfg, input)?, cfg.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gtdesign: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
