use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hypdim_cli::{execute, RunOptions};

#[derive(Parser)]
#[command(
    name = "hypdim",
    version,
    about = "Radial Julia sets and hyperbolic-dimension lower bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        threads: Option<usize>,
        /// Word cap for enumerations, overriding the scenario.
        #[arg(long)]
        cap: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            cap,
        } => {
            let code = execute(
                &config,
                &RunOptions {
                    out_dir: out,
                    threads,
                    cap,
                },
            );
            ExitCode::from(code as u8)
        }
    }
}
