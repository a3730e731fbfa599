//! `meshot` command-line experiments.
//!
//! Subcommands print one JSON document to stdout and write artifacts to
//! `--out DIR` when given. Exit codes: 0 success, 2 input error, 3
//! configuration error, 4 numerical failure.

mod bench;
mod check_si;
mod compare;
mod config;
mod deform_cmd;
mod error;
mod rates;
mod report;
mod svg;
mod toy;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "meshot", version, about = "Optimal-transport losses and deformation for meshes")]
struct Cli {
    /// Worker threads for parallel loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare two meshes with transport losses and evaluation metrics.
    Compare(compare::Args),
    /// Circle-to-polygon point-set experiment, SWD against Chamfer.
    Toy(toy::Args),
    /// Monte Carlo error rates of the sliced estimator in L and m.
    Rates(rates::Args),
    /// Wall-time scaling of the losses with the number of supports.
    Bench(bench::Args),
    /// Percentage of self-intersecting faces of a mesh.
    CheckSi(check_si::Args),
    /// Deform a source mesh onto a target from a key=value run config.
    Deform(deform_cmd::Args),
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            n
        }
        None => rayon::current_num_threads(),
    };
    let env = report::Environment { threads };
    match cli.command {
        Command::Compare(a) => compare::run(&a, &env),
        Command::Toy(a) => toy::run(&a, &env),
        Command::Rates(a) => rates::run(&a, &env),
        Command::Bench(a) => bench::run(&a, &env),
        Command::CheckSi(a) => check_si::run(&a, &env),
        Command::Deform(a) => deform_cmd::run(&a, &env),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(json) => {
            println!("{}", serde_json::to_string_pretty(&json).expect("serializable report"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
