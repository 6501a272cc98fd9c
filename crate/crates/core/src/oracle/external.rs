//! Runs an external solver on an emitted CNF or OPB file.
//!
//! The command is invoked as `<program> <args...> <file>`. Output follows
//! the competition conventions: an `s SATISFIABLE` / `s UNSATISFIABLE` /
//! `s UNKNOWN` status line and `v` value lines holding DIMACS literals
//! (`-3`) or OPB names (`-x3`). Exit codes 10 and 20 are accepted as
//! SAT/UNSAT when no status line is printed.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use super::{Budget, SolveResult};
use crate::encode::{cnf_text, opb_text, Cnf, Formula, TextFormat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
    pub format: TextFormat,
}

impl ExternalSolver {
    /// Splits a command line on whitespace.
    pub fn parse(command: &str, format: TextFormat) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Bridge("empty solver command".into()))?;
        Ok(ExternalSolver {
            program,
            args: parts.collect(),
            format,
        })
    }
}

static FILE_COUNTER: AtomicU64 = AtomicU64::new(0);

fn scratch_path(ext: &str) -> PathBuf {
    let n = FILE_COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("robex-{}-{n}.{ext}", std::process::id()))
}

/// Parses solver output into a verdict and (for SAT) the set of true
/// variables up to `num_vars`.
pub fn parse_output(stdout: &str, exit_code: Option<i32>, num_vars: u32) -> Result<SolveResult> {
    let mut status: Option<&str> = None;
    let mut model = vec![false; num_vars as usize + 1];
    let mut saw_values = false;
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(rest.trim());
        } else if let Some(rest) = line.strip_prefix("v ").or_else(|| (line == "v").then_some("")) {
            saw_values = true;
            for tok in rest.split_whitespace() {
                let (neg, name) = match tok.strip_prefix('-') {
                    Some(t) => (true, t),
                    None => (false, tok.strip_prefix('+').unwrap_or(tok)),
                };
                let name = name.strip_prefix('~').map(|n| (true, n)).unwrap_or((false, name));
                let neg = neg ^ name.0;
                let digits = name.1.strip_prefix('x').unwrap_or(name.1);
                let v: u32 = digits
                    .parse()
                    .map_err(|_| Error::Bridge(format!("unparsable value token `{tok}`")))?;
                if v == 0 {
                    continue;
                }
                if let Some(slot) = model.get_mut(v as usize) {
                    *slot = !neg;
                }
            }
        }
    }
    let status = match (status, exit_code) {
        (Some(s), _) => s.to_string(),
        (None, Some(10)) => "SATISFIABLE".to_string(),
        (None, Some(20)) => "UNSATISFIABLE".to_string(),
        (None, code) => {
            return Err(Error::Bridge(format!(
                "no status line in solver output (exit code {code:?})"
            )));
        }
    };
    match status.as_str() {
        "SATISFIABLE" | "OPTIMUM FOUND" => {
            if !saw_values {
                return Err(Error::Bridge("solver reported SAT without a model".into()));
            }
            Ok(SolveResult::Sat(model))
        }
        "UNSATISFIABLE" => Ok(SolveResult::Unsat),
        "UNKNOWN" | "TIMEOUT" => Ok(SolveResult::ResourceOut),
        other => Err(Error::Bridge(format!("unrecognized status `{other}`"))),
    }
}

/// Emits `f`, runs the external solver and re-verifies any model.
pub fn solve_external(f: &Formula, solver: &ExternalSolver, budget: Budget) -> Result<SolveResult> {
    let (text, ext) = match solver.format {
        TextFormat::Cnf => (cnf_text(&Cnf::from_formula(f)), "cnf"),
        TextFormat::Opb => (opb_text(f), "opb"),
    };
    let path = scratch_path(ext);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    let outcome = run(solver, &path, budget.time);
    let _ = std::fs::remove_file(&path);
    let (stdout, code) = match outcome? {
        Some(x) => x,
        None => return Ok(SolveResult::ResourceOut),
    };
    match parse_output(&stdout, code, f.num_vars())? {
        SolveResult::Sat(model) => {
            if !f.check(&model) {
                return Err(Error::Bridge(
                    "verification failed: external model violates the formula".into(),
                ));
            }
            Ok(SolveResult::Sat(model))
        }
        other => Ok(other),
    }
}

/// Runs the command; `None` when the time limit killed it.
fn run(solver: &ExternalSolver, path: &PathBuf, limit: Option<Duration>) -> Result<Option<(String, Option<i32>)>> {
    let mut child = Command::new(&solver.program)
        .args(&solver.args)
        .arg(path)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::Bridge(format!("cannot start `{}`: {e}", solver.program)))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let deadline = limit.map(|d| Instant::now() + d);
    let status = loop {
        if let Some(st) = child.try_wait().map_err(|e| Error::Bridge(e.to_string()))? {
            break st;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            let _ = child.kill();
            let _ = child.wait();
            return Ok(None);
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let out = reader
        .join()
        .map_err(|_| Error::Bridge("reader thread panicked".into()))?
        .map_err(|e| Error::Bridge(format!("reading solver output: {e}")))?;
    Ok(Some((out, status.code())))
}
