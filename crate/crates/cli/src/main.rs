//! `lrn`: simulate episodes, sweep the affordance threshold, score heatmaps
//! offline, build labels from point tracks and generate worlds.
//!
//! Exit codes: 0 success, 1 episode failure, 2 usage or input error.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod ablate;
mod common;
mod eval_offline;
mod gen_world;
mod label;
mod simulate;

#[derive(Debug, Parser)]
#[command(name = "lrn", version, about = "Long-range frontier navigation in simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Simulate(simulate::Args),
    Ablate(ablate::Args),
    EvalOffline(eval_offline::Args),
    Label(label::Args),
    GenWorld(gen_world::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = common::threads_from_env().and_then(|()| match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Ablate(a) => ablate::run(a),
        Command::EvalOffline(a) => eval_offline::run(a),
        Command::Label(a) => label::run(a),
        Command::GenWorld(a) => gen_world::run(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
