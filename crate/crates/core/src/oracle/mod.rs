//! Satisfiability oracles: the embedded CDCL solver and a bridge to
//! external DIMACS / OPB solvers. Every `Sat` answer is re-checked against
//! the original mixed formula before it is returned.

pub mod cdcl;
pub mod external;

use std::time::{Duration, Instant};

use crate::encode::{Cnf, Formula};
use crate::error::{Error, Result};

pub use cdcl::{Limits, Solver, Stats, Status};
pub use external::{solve_external, ExternalSolver};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    /// Model indexed by variable (index 0 unused), covering every variable
    /// of the formula.
    Sat(Vec<bool>),
    Unsat,
    ResourceOut,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

/// Conflict and wall-clock limits for one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budget {
    pub conflicts: Option<u64>,
    pub time: Option<Duration>,
}

impl Budget {
    pub fn unlimited() -> Self {
        Budget::default()
    }

    pub fn limits(&self) -> Limits {
        Limits {
            conflicts: self.conflicts,
            deadline: self.time.map(|t| Instant::now() + t),
        }
    }
}

/// Which solver answers queries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Backend {
    #[default]
    Embedded,
    External(ExternalSolver),
}

impl Backend {
    pub fn solve(&self, f: &Formula, budget: Budget) -> Result<SolveResult> {
        match self {
            Backend::Embedded => solve(f, budget),
            Backend::External(s) => solve_external(f, s, budget),
        }
    }
}

/// Solver choice plus per-query limits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    pub backend: Backend,
    pub budget: Budget,
}

/// Loads the clausal form of `f` into a fresh solver.
pub fn load(f: &Formula) -> Solver {
    let cnf = Cnf::from_formula(f);
    let mut s = Solver::new();
    s.reserve_vars(cnf.num_vars);
    for c in &cnf.clauses {
        if !s.add_clause(c) {
            break;
        }
    }
    s
}

/// Decides `f` with the embedded solver.
pub fn solve(f: &Formula, budget: Budget) -> Result<SolveResult> {
    let mut s = load(f);
    match s.solve(budget.limits()) {
        Status::Unsat => Ok(SolveResult::Unsat),
        Status::Unknown => Ok(SolveResult::ResourceOut),
        Status::Sat => {
            let model = s.model()[..=f.num_vars() as usize].to_vec();
            if !f.check(&model) {
                return Err(Error::Verification("embedded solver model violates the formula".into()));
            }
            Ok(SolveResult::Sat(model))
        }
    }
}

/// Up to `limit` distinct full models of `f` (over the formula's own
/// variables). Intended for tests and small enumeration tasks.
pub fn all_models(f: &Formula, limit: usize) -> Vec<Vec<bool>> {
    let n = f.num_vars();
    let mut s = load(f);
    let mut out = Vec::new();
    while out.len() < limit && s.solve(Limits::default()) == Status::Sat {
        let model = s.model()[..=n as usize].to_vec();
        debug_assert!(f.check(&model));
        let block: Vec<crate::encode::Lit> = (1..=n)
            .map(|v| crate::encode::Lit::new(v, !model[v as usize]))
            .collect();
        out.push(model);
        if block.is_empty() || !s.add_clause(&block) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{Lit, PBConstraint, Relation};

    #[test]
    fn pigeonhole_as_pb_is_unsat() {
        // 4 pigeons, 3 holes: each pigeon somewhere, each hole at most one.
        let mut f = Formula::new();
        let x: Vec<Vec<Lit>> = (0..4).map(|_| (0..3).map(|_| f.new_aux()).collect()).collect();
        for row in &x {
            f.add_pb(PBConstraint::at_least(row, 1));
        }
        for j in 0..3 {
            let col: Vec<Lit> = x.iter().map(|r| r[j]).collect();
            f.add_pb(PBConstraint::at_most(&col, 1));
        }
        assert_eq!(solve(&f, Budget::unlimited()).unwrap(), SolveResult::Unsat);
    }

    #[test]
    fn sat_models_are_checked_against_pb() {
        let mut f = Formula::new();
        let v: Vec<Lit> = (0..6).map(|_| f.new_aux()).collect();
        f.add_pb(PBConstraint {
            terms: vec![(5, v[0]), (3, v[1]), (3, !v[2]), (2, v[3]), (7, v[4]), (1, v[5])],
            relation: Relation::Eq,
            bound: 11,
        });
        match solve(&f, Budget::unlimited()).unwrap() {
            SolveResult::Sat(m) => assert!(f.check(&m)),
            other => panic!("{other:?}"),
        }
        let models = all_models(&f, 1000);
        let direct = (0u32..64)
            .filter(|m| {
                let mut a = vec![false];
                a.extend((0..6).map(|i| m >> i & 1 == 1));
                f.check(&a)
            })
            .count();
        assert_eq!(models.len(), direct);
    }

    #[test]
    fn empty_formula_is_sat() {
        assert!(solve(&Formula::new(), Budget::unlimited()).unwrap().is_sat());
    }
}
