use std::process::ExitCode;

use christoffel::par::{self, Execution};
use christoffel::Error;
use clap::Parser;

mod args;
mod commands;
mod output;

use args::{Cli, Command};

/// Exit codes of the binary.
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv { .. } | Error::Cache(_) | Error::NonFinite { .. } => EXIT_IO,
        Error::NotPsd { .. } => EXIT_NUMERICAL,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    if let Ok(v) = std::env::var("CHRISTOFFEL_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => {
                if !par::init_thread_pool(t) {
                    log::warn!("could not cap the thread pool at {t}");
                }
            }
            _ => {
                eprintln!("error: CHRISTOFFEL_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };

    let result = match cli.command {
        Command::Sample(a) => commands::sample(a, exec),
        Command::RankCurve(a) => commands::rank_curve(a, exec),
        Command::Density(a) => commands::density(a, exec),
        Command::Perturb(a) => commands::perturb(a, exec),
        Command::ChristoffelEval(a) => commands::christoffel_eval(a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
