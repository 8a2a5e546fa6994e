// SPDX-License-Identifier: Apache-2.0

//! Command-line front end: generate, verify, characterize and protocol.

pub mod commands;
pub mod config;
pub mod error;
pub mod protocol;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_characterize, cmd_generate, cmd_protocol, cmd_verify, FaultTarget};
pub use config::{CommonArgs, CompilerConfig, ENV_OUT};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rramc", version, about = "1T1R RRAM array compiler")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write netlists, GDSII and SVG for one array
    Generate(CommonArgs),
    /// Run DRC, extraction and LVS on the generated array
    Verify(VerifyArgs),
    /// Parasitic and settling-time sweeps with fits and plots
    Characterize(CommonArgs),
    /// Execute a read/write script against the behavioural array
    Protocol(ProtocolArgs),
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Plant one fault before checking
    #[arg(long, value_enum)]
    pub fault_inject: Option<FaultTarget>,
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Script of `write <addr> <hexword>` / `read <addr>` lines
    #[arg(long)]
    pub script: PathBuf,
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(ENV_OUT).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Runs one parsed command, printing a short summary to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = CompilerConfig::resolve(&args, env_out())?;
            for p in cmd_generate(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Verify(args) => {
            let cfg = CompilerConfig::resolve(&args.common, env_out())?;
            let out = cmd_verify(&cfg, args.fault_inject)?;
            println!("DRC clean; report: {}", out.drc_report.display());
            println!(
                "LVS MATCH after {} rounds; report: {}",
                out.lvs.rounds,
                out.lvs_report.display()
            );
        }
        Command::Characterize(args) => {
            let cfg = CompilerConfig::resolve(&args, env_out())?;
            let report = cmd_characterize(&cfg)?;
            for (metric, unit, fit) in &report.linear_fits {
                println!("{metric}: {:e} {unit}/cell (r² = {:.6})", fit.slope, fit.r_squared);
            }
            for (corner, fit) in &report.settling_fits {
                println!("settling {corner}: {:e} s · exp({:e} · n)", fit.a, fit.k);
            }
            println!("wrote {}", cfg.out.join(commands::PEX_DIR).display());
        }
        Command::Protocol(args) => {
            let cfg = CompilerConfig::resolve(&args.common, env_out())?;
            print!("{}", cmd_protocol(&cfg, &args.script)?);
        }
    }
    Ok(())
}
