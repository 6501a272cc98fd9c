//! Command-line front end: argument parsing, command dispatch and report
//! rendering. `main` only prints the rendered report and exits with its
//! status.

pub mod args;
pub mod bench;
pub mod commands;
pub mod demo;
pub mod report;

use anyhow::{Context, Result};

pub use args::Cli;
use args::Command;
use commands::{EXIT_CONFIG, EXIT_TRIVIAL, EXIT_UNKNOWN};
pub use report::Report;

/// Runs one command and returns its report.
pub fn execute(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Robust(a) => commands::cmd_robust(a),
        Command::Global(a) => commands::cmd_global(a),
        Command::Explain(a) => commands::cmd_explain(a),
        Command::Demo(a) => demo::cmd_demo(a),
        Command::Bench(a) => bench::cmd_bench(a),
        Command::Gen(a) => bench::cmd_gen(a),
        Command::Sat(a) => commands::cmd_sat(a),
    }
}

fn run_args(cli: &Cli) -> Option<&args::RunArgs> {
    match &cli.command {
        Command::Robust(a) => Some(&a.run),
        Command::Global(a) => Some(&a.run),
        Command::Explain(a) => Some(&a.run),
        Command::Demo(a) => Some(a),
        Command::Bench(a) => Some(&a.run),
        Command::Gen(_) | Command::Sat(_) => None,
    }
}

/// Exit status for a failed command.
pub fn error_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<robex::Error>() {
        Some(robex::Error::TrivialClassifier) => EXIT_TRIVIAL,
        Some(robex::Error::Undecided(_)) => EXIT_UNKNOWN,
        _ => EXIT_CONFIG,
    }
}

/// Runs a command and delivers its report to standard output or `--out`.
/// Returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    let outcome = execute(cli).and_then(|report| {
        let format = run_args(cli).map_or(args::Format::Human, |r| r.format);
        let text = report.render(format);
        match run_args(cli).and_then(|r| r.out.as_ref()) {
            Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(report.code)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            error_code(&e)
        }
    }
}
