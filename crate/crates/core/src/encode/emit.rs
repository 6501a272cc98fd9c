//! Text formats for external solvers: DIMACS CNF and OPB.

use std::fmt::Write as _;
use std::path::Path;

use super::formula::{Formula, Lit, PBConstraint, Relation};
use super::pb::pb_to_cnf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    Cnf,
    Opb,
}

/// Pure clause set: the formula's clauses plus every PB constraint
/// translated with fresh variables numbered after the formula's own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn from_formula(f: &Formula) -> Cnf {
        let mut next = f.num_vars();
        let mut clauses = f.clauses.clone();
        for c in &f.pb {
            clauses.extend(pb_to_cnf(c, &mut next));
        }
        Cnf {
            num_vars: next,
            clauses,
        }
    }
}

pub fn cnf_text(cnf: &Cnf) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len());
    for c in &cnf.clauses {
        for l in c {
            write!(out, "{} ", l.to_dimacs()).unwrap();
        }
        out.push_str("0\n");
    }
    out
}

/// `Σ a·l >= b` over positive literals only, `a·¬x` rewritten as `a - a·x`.
fn opb_line(terms: &[(i64, Lit)], relation: &str, bound: i64) -> String {
    let mut merged: Vec<(u32, i128)> = Vec::new();
    let mut b = bound as i128;
    for &(a, l) in terms {
        let (v, c) = if l.is_positive() {
            (l.var(), a as i128)
        } else {
            b -= a as i128;
            (l.var(), -(a as i128))
        };
        match merged.iter_mut().find(|(x, _)| *x == v) {
            Some(e) => e.1 += c,
            None => merged.push((v, c)),
        }
    }
    let mut line = String::new();
    for (v, c) in merged.into_iter().filter(|(_, c)| *c != 0) {
        write!(line, "{c:+} x{v} ").unwrap();
    }
    if line.is_empty() {
        // OPB needs at least one term; 0·x1 keeps the constant constraint.
        line.push_str("+0 x1 ");
    }
    write!(line, "{relation} {b} ;").unwrap();
    line
}

pub fn opb_text(f: &Formula) -> String {
    let constraints = f.clauses.len() + f.pb.len();
    let vars = f.num_vars().max(1);
    let mut out = format!("* #variable= {vars} #constraint= {constraints}\n");
    for c in &f.clauses {
        let terms: Vec<(i64, Lit)> = c.iter().map(|&l| (1, l)).collect();
        out.push_str(&opb_line(&terms, ">=", 1));
        out.push('\n');
    }
    for PBConstraint { terms, relation, bound } in &f.pb {
        let line = match relation {
            Relation::Ge => opb_line(terms, ">=", *bound),
            Relation::Eq => opb_line(terms, "=", *bound),
            Relation::Le => {
                let neg: Vec<(i64, Lit)> = terms.iter().map(|&(a, l)| (-a, l)).collect();
                opb_line(&neg, ">=", -bound)
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Writes `f` in the requested format. CNF output translates PB
/// constraints first.
pub fn emit(f: &Formula, format: TextFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        TextFormat::Cnf => cnf_text(&Cnf::from_formula(f)),
        TextFormat::Opb => opb_text(f),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses DIMACS CNF text.
pub fn parse_dimacs(text: &str) -> Result<Cnf> {
    let mut num_vars: Option<u32> = None;
    let mut declared = 0usize;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: Some(n + 1),
            field: None,
            message,
        };
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(bad(format!("malformed header `{line}`")));
            }
            num_vars = Some(parts[2].parse().map_err(|_| bad("bad variable count".into()))?);
            declared = parts[3].parse().map_err(|_| bad("bad clause count".into()))?;
            continue;
        }
        let nv = num_vars.ok_or_else(|| bad("clause before the `p cnf` header".into()))?;
        for tok in line.split_whitespace() {
            let v: i32 = tok.parse().map_err(|_| bad(format!("`{tok}` is not a literal")))?;
            if v == 0 {
                clauses.push(std::mem::take(&mut current));
            } else {
                if v.unsigned_abs() > nv {
                    return Err(bad(format!("literal {v} exceeds the declared {nv} variables")));
                }
                current.push(Lit::from_dimacs(v));
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    let num_vars = num_vars.ok_or_else(|| Error::Parse {
        line: None,
        field: None,
        message: "missing `p cnf` header".into(),
    })?;
    if clauses.len() != declared {
        return Err(Error::Parse {
            line: None,
            field: None,
            message: format!("header declares {declared} clauses, found {}", clauses.len()),
        });
    }
    Ok(Cnf { num_vars, clauses })
}
