mod commands;
mod config;

use clap::Parser;
use config::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Factor(args) => commands::cmd_factor(args),
        Command::Bench(args) => commands::cmd_bench(args),
        Command::Stability(args) => commands::cmd_stability(args),
        Command::Dag(args) => commands::cmd_dag(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
