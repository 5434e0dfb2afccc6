mod args;
mod commands;
mod manifest;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// How a run failed, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or inputs (exit 1).
    Validation(String),
    /// A solver produced a non-finite value (exit 2).
    Numerical(String),
}

impl From<gait::GaitError> for Failure {
    fn from(e: gait::GaitError) -> Self {
        match e {
            gait::GaitError::NumericalFailure { .. } => Failure::Numerical(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("error: invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(1);
        }
    };

    let threads = match std::env::var("GAIT_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                eprintln!("error: GAIT_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(1);
            }
        },
        Err(_) => cli.threads,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} threads: {e}");
            return ExitCode::from(1);
        }
    };

    // Output is buffered so a failed run prints nothing but the error.
    let mut buf = Vec::new();
    match pool.install(|| commands::run(&cli, &mut buf)) {
        Ok(()) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&buf).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
    }
}
