use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{Context, Result};
use robex::encode::parse_dimacs;
use robex::explain::{enumerate_explanations, find_axp, find_cxp};
use robex::oracle::{Budget, Solver, Status};
use robex::robustness::{
    find_global_counterexample_with, find_transition_point, is_locally_robust, is_nontrivial, route_for,
    sample_local_robustness, GlobalResult, RobustnessVerdict, SampleVerdict, SamplingConfig,
};
use robex::{distance, Classifier, DistanceSpec, ExplanationProblem, Norm};
use serde_json::Value;

use crate::args::{parse_constraints, ExplainArgs, ExplainKind, GlobalArgs, RobustArgs, SatArgs};
use crate::bench::table1_row;
use crate::report::{num, point_json, point_text, set_json, set_text, Obj, Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FOUND: i32 = 10;
pub const EXIT_UNKNOWN: i32 = 20;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRIVIAL: i32 = 3;

fn model_name(path: &str) -> String {
    path.strip_prefix("builtin:").map(str::to_string).unwrap_or_else(|| {
        std::path::Path::new(path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string())
    })
}

pub fn cmd_robust(a: &RobustArgs) -> Result<Report> {
    let clf = a.model.load()?;
    let settings = a.run.settings()?;
    let v = a.instance.point(clf.dim())?;
    let problem = ExplanationProblem::predicted(&clf, v.clone())?;
    let spec = a.ball.spec()?;
    let xi = parse_constraints(&a.constraints, clf.dim())?;
    let route = route_for(&clf, spec.norm)?;
    let start = Instant::now();
    let verdict = is_locally_robust(&problem, &spec, xi.as_ref(), &settings)?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut human = String::new();
    let _ = writeln!(human, "instance {} has class {}", point_text(&v), problem.label());
    let _ = writeln!(human, "ball: {} {}", spec.norm, num(spec.epsilon));
    let mut obj = Obj::new(a.run.deterministic)
        .set("command", "robust")
        .set("point", point_json(&v))
        .set("label", problem.label().to_string())
        .set("norm", spec.norm.to_string())
        .set("eps", num(spec.epsilon))
        .set("route", format!("{route:?}").to_lowercase());
    let code = match &verdict {
        RobustnessVerdict::Robust => {
            let _ = writeln!(human, "verdict: Robust");
            obj = obj.set("verdict", "robust");
            EXIT_OK
        }
        RobustnessVerdict::NotRobust(x) => {
            let lx = clf.evaluate(x)?;
            let d = distance(x, &v, spec.norm)?;
            let _ = writeln!(human, "verdict: NotRobust");
            let _ = writeln!(
                human,
                "witness: {} with class {lx} at distance {}",
                point_text(x),
                num(d)
            );
            obj = obj
                .set("verdict", "not-robust")
                .set("witness", point_json(x))
                .set("witness_label", lx.to_string())
                .set("distance", num(d));
            EXIT_FOUND
        }
        RobustnessVerdict::Unknown(why) => {
            let _ = writeln!(human, "verdict: Unknown ({why})");
            obj = obj.set("verdict", "unknown").set("reason", why.clone());
            EXIT_UNKNOWN
        }
    };
    if let Some(n) = a.samples {
        let cfg = SamplingConfig::uniform(n, a.run.seed);
        let sampled = sample_local_robustness(&problem, &spec, &cfg)?;
        let (text, value) = match &sampled {
            SampleVerdict::NoAExFound(k) => (format!("no adversarial example in {k} samples"), Value::from(*k)),
            SampleVerdict::AExFound(x) => (format!("adversarial example {}", point_text(x)), point_json(x)),
        };
        let _ = writeln!(human, "sampling: {text}");
        obj = obj.set(
            "sampling",
            Obj::new(true)
                .set("samples", n)
                .set("seed", a.run.seed)
                .set(
                    if matches!(sampled, SampleVerdict::AExFound(_)) {
                        "aex"
                    } else {
                        "clean"
                    },
                    value,
                )
                .build(),
        );
    }
    if !a.run.deterministic {
        let _ = writeln!(human, "time: {elapsed:.3}s");
    }
    Ok(Report::new(code, human, obj.time("time", elapsed).build()))
}

/// Closed-form cross-check for real-valued models: the class boundary on
/// the segment between two differently classified points.
fn transition_cross_check(clf: &Classifier<f64>) -> Result<Option<Vec<f64>>> {
    if clf.space().is_discrete() {
        return Ok(None);
    }
    let Some((a, b)) = is_nontrivial(clf, &Default::default())? else {
        return Ok(None);
    };
    Ok(Some(find_transition_point(clf, &a, &b, &1e-9, Norm::LInf)?.point))
}

pub fn cmd_global(a: &GlobalArgs) -> Result<Report> {
    let original = a.model.load()?;
    let clf = a.model.load_discrete()?;
    let settings = a.run.settings()?;
    let spec = a.ball.spec()?;
    let start = Instant::now();
    let result = find_global_counterexample_with(&clf, &spec, &settings, a.method.into())?;
    let elapsed = start.elapsed().as_secs_f64();
    let transition = transition_cross_check(&original)?;
    let name = model_name(&a.model.model);

    let mut human = String::new();
    let mut obj = Obj::new(a.run.deterministic)
        .set("command", "global")
        .set("model", name.clone())
        .set("norm", spec.norm.to_string())
        .set("eps", num(spec.epsilon));
    let (code, aex) = match &result {
        GlobalResult::Found { v, x } => {
            let (lv, lx) = (clf.evaluate(v)?, clf.evaluate(x)?);
            let d = distance(x, v, spec.norm)?;
            let _ = writeln!(
                human,
                "counterexample to global robustness ({} {}):",
                spec.norm,
                num(spec.epsilon)
            );
            let _ = writeln!(human, "  v = {} class {lv}", point_text(v));
            let _ = writeln!(human, "  x = {} class {lx}", point_text(x));
            let _ = writeln!(human, "  distance {}", num(d));
            obj = obj
                .set("aex", true)
                .set("v", point_json(v))
                .set("v_label", lv.to_string())
                .set("x", point_json(x))
                .set("x_label", lx.to_string())
                .set("distance", num(d));
            (EXIT_FOUND, Some(true))
        }
        GlobalResult::None => {
            let _ = writeln!(human, "no counterexample within {} {}", spec.norm, num(spec.epsilon));
            obj = obj.set("aex", false);
            (EXIT_OK, Some(false))
        }
        GlobalResult::Unknown(why) => {
            let _ = writeln!(human, "undecided: {why}");
            obj = obj.set("aex", Value::Null).set("reason", why.clone());
            (EXIT_UNKNOWN, None)
        }
    };
    if let Some(t) = &transition {
        let _ = writeln!(human, "  class boundary on the real line at {}", point_text(t));
        obj = obj.set("transition", point_json(t));
    }
    let mut table = Table::new(&crate::bench::TABLE1_HEADER);
    table
        .rows
        .push(table1_row(&name, &clf, &spec, aex, elapsed, None, a.run.deterministic));
    let _ = write!(human, "\n{}", table.aligned());
    let mut report = Report::new(code, human, obj.time("time", elapsed).build());
    report.table = Some(table);
    Ok(report)
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<Report> {
    let clf = a.model.load()?;
    let settings = a.run.settings()?;
    let v = a.instance.point(clf.dim())?;
    let problem = ExplanationProblem::predicted(&clf, v.clone())?;
    let spec = match &a.eps {
        Some(e) => DistanceSpec::new(a.norm, crate::args::parse_scalar(e, "--eps")?)?,
        None => DistanceSpec::new(Norm::L0, clf.dim() as f64)?,
    };
    let all: Vec<usize> = (0..clf.dim()).collect();
    let mut human = String::new();
    let _ = writeln!(
        human,
        "instance {} class {}, ball {} {}",
        point_text(&v),
        problem.label(),
        spec.norm,
        num(spec.epsilon)
    );
    let obj = Obj::new(a.run.deterministic)
        .set("command", "explain")
        .set("point", point_json(&v))
        .set("label", problem.label().to_string())
        .set("norm", spec.norm.to_string())
        .set("eps", num(spec.epsilon));
    let start = Instant::now();
    let (code, obj) = match a.kind {
        ExplainKind::Axp | ExplainKind::Cxp => {
            let e = if a.kind == ExplainKind::Axp {
                find_axp(&problem, &spec, &all, &settings)?
            } else {
                find_cxp(&problem, &spec, &all, &settings)?
            };
            let _ = writeln!(human, "{}: {}", e.kind, set_text(&e.features));
            let _ = writeln!(human, "oracle calls: {}", e.oracle_calls);
            let obj = obj
                .set("kind", e.kind.to_string())
                .set("features", set_json(&e.features))
                .set("oracle_calls", e.oracle_calls);
            (EXIT_OK, obj)
        }
        ExplainKind::Enumerate => {
            let l = enumerate_explanations(&problem, &spec, a.limit, &settings)?;
            let found = l.axps.len() + l.cxps.len();
            let stopped_by_limit = a.limit.is_some_and(|k| found >= k);
            for s in &l.axps {
                let _ = writeln!(human, "AXp {}", set_text(s));
            }
            for s in &l.cxps {
                let _ = writeln!(human, "CXp {}", set_text(s));
            }
            let _ = writeln!(
                human,
                "{} ({} oracle calls)",
                if l.complete { "complete" } else { "incomplete" },
                l.oracle_calls
            );
            let code = if l.complete || stopped_by_limit {
                EXIT_OK
            } else {
                EXIT_UNKNOWN
            };
            let obj = obj
                .set("axps", Value::Array(l.axps.iter().map(|s| set_json(s)).collect()))
                .set("cxps", Value::Array(l.cxps.iter().map(|s| set_json(s)).collect()))
                .set("complete", l.complete)
                .set("oracle_calls", l.oracle_calls);
            (code, obj)
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    Ok(Report::new(code, human, obj.time("time", elapsed).build()))
}

/// Competition-style solver front end: exit 10 SAT, 20 UNSAT, 0 unknown.
pub fn cmd_sat(a: &SatArgs) -> Result<Report> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let cnf = parse_dimacs(&text)?;
    let mut s = Solver::new();
    s.reserve_vars(cnf.num_vars);
    let mut ok = true;
    for c in &cnf.clauses {
        if !s.add_clause(c) {
            ok = false;
            break;
        }
    }
    let budget = Budget {
        conflicts: a.limit_conflicts,
        time: a.limit_time.map(std::time::Duration::from_secs_f64),
    };
    let status = if ok { s.solve(budget.limits()) } else { Status::Unsat };
    let (code, out) = match status {
        Status::Sat => {
            let m = s.model();
            let lits: Vec<String> = (1..=cnf.num_vars)
                .map(|v| if m[v as usize] { v.to_string() } else { format!("-{v}") })
                .collect();
            (10, format!("s SATISFIABLE\nv {} 0\n", lits.join(" ")))
        }
        Status::Unsat => (20, "s UNSATISFIABLE\n".to_string()),
        Status::Unknown => (EXIT_OK, "s UNKNOWN\n".to_string()),
    };
    Ok(Report::new(code, out.clone(), Value::String(out)))
}
