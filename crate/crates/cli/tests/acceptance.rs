//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robex::brute::{brute_enumerate_explanations, brute_find_aex, DEFAULT_CAP};
use robex::encode::TextFormat;
use robex::explain::AexOracle;
use robex::model::fixtures::{build_kappa1, build_kappa2};
use robex::model::generate::{random_bnn, random_lookup, BnnShape};
use robex::model::io::{load_model, save_model};
use robex::{
    certify_demo, check_mhs_duality, cxp_from_aex, distance, enumerate_explanations, find_aex,
    find_global_counterexample, find_transition_point, is_locally_robust, local_flip_threshold, plain_explanation,
    AexResult, Backend, BigRational, Classifier, DistanceSpec, ExplanationKind, ExplanationListing, ExplanationProblem,
    ExternalSolver, GlobalResult, Norm, RobustnessVerdict, SampleVerdict, SamplingConfig, Scalar, Settings,
};
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_robex");

// pinned tolerances and limits
const TRANSITION: f64 = 0.69459459;
const TRANSITION_TOL: f64 = 1e-6;
const FLIP: f64 = 0.00540541;
const FLIP_TOL: f64 = 1e-6;
const BISECTION_TOL: f64 = 1e-9;
const QS: f64 = 1e-6;
const C1_LIMIT: Duration = Duration::from_secs(1);
const C4_LIMIT: Duration = Duration::from_secs(60);
const C4_MODELS: u64 = 100;
const C5_QUERIES: u64 = 500;
const C6_INSTANCES: u64 = 50;
const C8_POINTS: usize = 1000;
const C8_SAMPLES: usize = 100;
const C8_EPS: f64 = 1e-4;
const SEED: u64 = 20240611;

struct Outcome {
    pass: bool,
    detail: String,
    /// Timing-free record of what was computed, compared across runs.
    data: Value,
}

fn outcome(pass: bool, detail: impl Into<String>, data: Value) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
        data,
    }
}

fn linf(eps: f64) -> DistanceSpec<f64> {
    DistanceSpec::new(Norm::LInf, eps).unwrap()
}

fn straddles(v: &[f64], x: &[f64]) -> bool {
    let (lo, hi) = if v[0] <= x[0] { (v[0], x[0]) } else { (x[0], v[0]) };
    lo < TRANSITION && TRANSITION - TRANSITION_TOL <= hi
}

fn criterion_1() -> Outcome {
    let k1 = build_kappa1::<f64>();
    let t = find_transition_point(&k1, &[0.0], &[1.0], &BISECTION_TOL, Norm::LInf).unwrap();
    let mut pass = (t.point[0] - TRANSITION).abs() <= TRANSITION_TOL;
    let mut detail = format!("transition {:.8}", t.point[0]);
    let q = k1.quantized(&QS).unwrap();
    let mut pairs = Vec::new();
    for eps in [1e-4, 1e-2, 0.1] {
        let start = Instant::now();
        let r = find_global_counterexample(&q, &linf(eps), &Settings::default()).unwrap();
        let took = start.elapsed();
        let ok = match &r {
            GlobalResult::Found { v, x } => {
                straddles(v, x)
                    && q.evaluate(v).unwrap() != q.evaluate(x).unwrap()
                    && distance(v, x, Norm::LInf).unwrap() <= eps
            }
            _ => false,
        };
        pass &= ok && took < C1_LIMIT;
        detail += &format!(
            "; eps {eps}: {} in {:.3}s",
            if ok { "straddling pair" } else { "no pair" },
            took.as_secs_f64()
        );
        pairs.push(json!(format!("{r:?}")));
    }
    outcome(pass, detail, json!({"transition": t.point[0], "pairs": pairs}))
}

fn criterion_2() -> Outcome {
    let k1 = build_kappa1::<f64>();
    let p = ExplanationProblem::predicted(&k1, vec![0.7]).unwrap();
    let s = Settings::default();
    let at_005 = is_locally_robust(&p, &linf(0.005), None, &s).unwrap();
    let at_006 = is_locally_robust(&p, &linf(0.006), None, &s).unwrap();
    let exact = build_kappa1::<BigRational>();
    let pe = ExplanationProblem::predicted(&exact, vec![BigRational::parse_decimal("0.7").unwrap()]).unwrap();
    let flip = local_flip_threshold(&pe, Norm::LInf, &BigRational::from_integer(0.into()), &s).unwrap();
    let flip_f = f64::from_rational(&flip.epsilon);
    let pass = at_005 == RobustnessVerdict::Robust
        && matches!(at_006, RobustnessVerdict::NotRobust(_))
        && (flip_f - FLIP).abs() <= FLIP_TOL;
    let detail = format!(
        "eps 0.005 {}, eps 0.006 {}, flip threshold {flip_f:.8}",
        if at_005 == RobustnessVerdict::Robust {
            "Robust"
        } else {
            "not Robust"
        },
        if matches!(at_006, RobustnessVerdict::NotRobust(_)) {
            "NotRobust"
        } else {
            "not NotRobust"
        },
    );
    outcome(
        pass,
        detail,
        json!({"flip": flip.epsilon.to_string(), "at_006": format!("{at_006:?}")}),
    )
}

fn criterion_3() -> Outcome {
    let k2 = build_kappa2::<f64>();
    let p = ExplanationProblem::predicted(&k2, vec![0.0, 1.0]).unwrap();
    let s = Settings::default();
    let l5 = enumerate_explanations(&p, &linf(0.5), None, &s).unwrap();
    let l7 = enumerate_explanations(&p, &linf(0.7), None, &s).unwrap();
    let pa = plain_explanation(&p, ExplanationKind::Axp, &s).unwrap().features;
    let pc = plain_explanation(&p, ExplanationKind::Cxp, &s).unwrap().features;
    let empty: Vec<Vec<usize>> = vec![];
    let pass = l5.complete
        && l5.axps == vec![Vec::<usize>::new()]
        && l5.cxps == empty
        && l7.complete
        && l7.axps == vec![vec![0]]
        && l7.cxps == vec![vec![0]]
        && pa == vec![0]
        && pc == vec![0];
    let show = |l: &ExplanationListing| format!("AXps {:?} CXps {:?}", l.axps, l.cxps);
    let detail = format!(
        "eps 0.5: {}; eps 0.7: {}; plain {pa:?}/{pc:?} (0-based)",
        show(&l5),
        show(&l7)
    );
    outcome(pass, detail.clone(), json!(detail))
}

fn parse_point(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap().parse().unwrap())
        .collect()
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    let (mut failures, mut slowest, mut largest) = (Vec::new(), Duration::ZERO, 0);
    for seed in 0..C4_MODELS {
        let shape = BnnShape::random(SEED + seed);
        largest = largest.max(shape.hidden.iter().sum::<usize>());
        let clf = random_bnn::<f64>(&shape, SEED + seed).unwrap();
        let path = dir.path().join(format!("bnn-{seed:03}.json"));
        save_model(&clf, &path).unwrap();
        let clf: Classifier<f64> = load_model(&path).unwrap();
        for norm in ["l0", "linf"] {
            let cli = robex_cli::Cli::parse_from([
                "robex",
                "global",
                "--model",
                path.to_str().unwrap(),
                "--norm",
                norm,
                "--eps",
                "1",
                "--deterministic",
            ]);
            let start = Instant::now();
            let report = robex_cli::execute(&cli).unwrap();
            let took = start.elapsed();
            slowest = slowest.max(took);
            let r = &report.structured;
            let verified = r["aex"] == true && {
                let (v, x) = (parse_point(&r["v"]), parse_point(&r["x"]));
                let n = if norm == "l0" { Norm::L0 } else { Norm::LInf };
                clf.evaluate(&v).unwrap() != clf.evaluate(&x).unwrap() && distance(&v, &x, n).unwrap() <= 1.0
            };
            if !verified || took >= C4_LIMIT || report.code != 10 {
                failures.push(format!("seed {seed} {norm}"));
            }
            rows.push(r.clone());
        }
    }
    let detail = format!(
        "{} rows, {} verified AEx=Yes, up to {largest} neurons, slowest {:.3}s{}",
        rows.len(),
        rows.len() - failures.len(),
        slowest.as_secs_f64(),
        if failures.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failures.join(", "))
        }
    );
    outcome(failures.is_empty(), detail, Value::Array(rows))
}

fn random_query_model(rng: &mut ChaCha8Rng, seed: u64) -> Classifier<f64> {
    if rng.gen_bool(0.5) {
        random_lookup(rng.gen_range(2..=12), rng.gen_range(2..=3), seed).unwrap()
    } else {
        let shape = BnnShape {
            inputs: rng.gen_range(4..=12),
            hidden: (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=8)).collect(),
            classes: 2,
        };
        random_bnn(&shape, seed).unwrap()
    }
}

fn criterion_5() -> Outcome {
    let embedded = Settings::default();
    let external = Settings {
        backend: Backend::External(ExternalSolver::parse(&format!("{BIN} sat"), TextFormat::Cnf).unwrap()),
        ..Settings::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut disagreements, mut found, mut verdicts) = (0, 0, Vec::new());
    for q in 0..C5_QUERIES {
        let clf = random_query_model(&mut rng, SEED + q);
        let m = clf.dim();
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0..=1) as f64).collect();
        let p = ExplanationProblem::predicted(&clf, v.clone()).unwrap();
        let spec = if rng.gen_bool(0.5) {
            DistanceSpec::new(Norm::L0, rng.gen_range(1..=m) as f64).unwrap()
        } else {
            linf(if rng.gen_bool(0.5) { 1.0 } else { 0.5 })
        };
        let fixed: Vec<usize> = (0..m).filter(|_| rng.gen_bool(0.3)).collect();
        let truth = brute_find_aex(&p, &spec, &fixed, DEFAULT_CAP).unwrap().is_some();
        found += truth as usize;
        for settings in [&embedded, &external] {
            let got = match find_aex(&p, &spec, &fixed, settings).unwrap() {
                AexResult::Found(_) => Some(true),
                AexResult::None => Some(false),
                AexResult::Unknown(_) => None,
            };
            if got != Some(truth) {
                disagreements += 1;
            }
        }
        verdicts.push(truth);
    }
    let detail = format!(
        "{C5_QUERIES} queries ({found} with an AEx) x 2 backends, {disagreements} disagreements with exhaustive search"
    );
    outcome(disagreements == 0, detail, json!(verdicts))
}

struct DualityCase {
    clf: Classifier<f64>,
    v: Vec<f64>,
    spec: DistanceSpec<f64>,
    listing: ExplanationListing,
}

fn duality_cases() -> Vec<DualityCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xd0a1);
    (0..C6_INSTANCES)
        .map(|k| {
            let m = rng.gen_range(2..=8);
            let clf = if k % 2 == 0 {
                random_lookup(m, 2, SEED + k).unwrap()
            } else {
                let shape = BnnShape {
                    inputs: m,
                    hidden: vec![rng.gen_range(3..=6)],
                    classes: 2,
                };
                random_bnn(&shape, SEED + k).unwrap()
            };
            let v: Vec<f64> = (0..m).map(|_| rng.gen_range(0..=1) as f64).collect();
            let spec = DistanceSpec::new(Norm::L0, rng.gen_range(1..=m) as f64).unwrap();
            let p = ExplanationProblem::predicted(&clf, v.clone()).unwrap();
            let listing = enumerate_explanations(&p, &spec, None, &Settings::default()).unwrap();
            DualityCase { clf, v, spec, listing }
        })
        .collect()
}

fn criterion_6(cases: &[DualityCase]) -> Outcome {
    let mut bad = Vec::new();
    for (k, c) in cases.iter().enumerate() {
        let p = ExplanationProblem::predicted(&c.clf, c.v.clone()).unwrap();
        let brute = brute_enumerate_explanations(&p, &c.spec, DEFAULT_CAP).unwrap();
        let ok = c.listing.complete
            && c.listing.axps == brute.axps
            && c.listing.cxps == brute.cxps
            && check_mhs_duality(&c.listing).unwrap();
        if !ok {
            bad.push(k);
        }
    }
    let detail = format!(
        "{} instances, {} identical to the subset lattice and dual{}",
        cases.len(),
        cases.len() - bad.len(),
        if bad.is_empty() {
            String::new()
        } else {
            format!("; failed: {bad:?}")
        }
    );
    let data = cases
        .iter()
        .map(|c| json!({"axps": c.listing.axps, "cxps": c.listing.cxps}))
        .collect();
    outcome(bad.is_empty(), detail, Value::Array(data))
}

fn criterion_7(cases: &[DualityCase]) -> Outcome {
    let s = Settings::default();
    let (mut checked, mut failed, mut changes) = (0, 0, Vec::new());
    for c in cases {
        let p = ExplanationProblem::predicted(&c.clf, c.v.clone()).unwrap();
        let oracle = AexOracle::new(&p, c.spec.clone(), &s);
        for y in &c.listing.cxps {
            checked += 1;
            let fixed: Vec<usize> = (0..c.clf.dim()).filter(|i| !y.contains(i)).collect();
            let ok = match find_aex(&p, &c.spec, &fixed, &s).unwrap() {
                AexResult::Found(x) => {
                    let changed = cxp_from_aex(&c.v, &x).unwrap();
                    let ok = changed.iter().all(|i| y.contains(i)) && oracle.is_weak_cxp(&changed).unwrap();
                    changes.push(changed);
                    ok
                }
                _ => false,
            };
            failed += !ok as usize;
        }
    }
    let detail = format!("{checked} CXps, {} round-trips passed", checked - failed);
    outcome(failed == 0 && checked > 0, detail, json!(changes))
}

fn criterion_8() -> Outcome {
    let k1 = build_kappa1::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let points: Vec<Vec<f64>> = (0..C8_POINTS).map(|_| vec![rng.gen::<f64>()]).collect();
    let cfg = SamplingConfig::uniform(C8_SAMPLES, SEED);
    let report = certify_demo(&k1, &linf(C8_EPS), &points, &cfg, &Settings::default()).unwrap();
    let clean = report
        .rows
        .iter()
        .filter(|r| matches!(r.sampled, SampleVerdict::NoAExFound(_)))
        .count();
    let complete_not_robust = report
        .rows
        .iter()
        .filter(|r| matches!(r.complete, RobustnessVerdict::NotRobust(_)))
        .count();
    let refuted = match &report.refutation {
        GlobalResult::Found { v, x } => straddles(v, x) && distance(v, x, Norm::LInf).unwrap() <= C8_EPS,
        _ => false,
    };
    let detail = format!(
        "{clean}/{C8_POINTS} points show no AEx in {C8_SAMPLES} samples each at eps {C8_EPS}; \
         complete search: {complete_not_robust} sampled points not robust, global pair {}",
        if refuted { "refutes robustness" } else { "missing" }
    );
    outcome(
        clean == C8_POINTS && refuted,
        detail,
        json!({"refutation": format!("{:?}", report.refutation), "clean": clean}),
    )
}

fn run_criteria() -> Vec<(&'static str, std::thread::Result<Outcome>)> {
    let guarded = |f: &dyn Fn() -> Outcome| catch_unwind(AssertUnwindSafe(f));
    let cases = catch_unwind(duality_cases);
    let with_cases = |f: fn(&[DualityCase]) -> Outcome| match &cases {
        Ok(c) => guarded(&|| f(c)),
        Err(_) => Err(Box::new("instance generation panicked") as Box<dyn std::any::Any + Send>),
    };
    vec![
        ("transition point", guarded(&criterion_1)),
        ("local-robustness flip", guarded(&criterion_2)),
        ("kappa2 explanations", guarded(&criterion_3)),
        ("global guarantee on random BNNs", guarded(&criterion_4)),
        ("oracle equivalence", guarded(&criterion_5)),
        ("duality", with_cases(criterion_6)),
        ("CXp round trip", with_cases(criterion_7)),
        ("sampling critique", guarded(&criterion_8)),
    ]
}

fn cli_bytes(args: &[&str]) -> Vec<u8> {
    let out = Command::new(BIN)
        .args(args)
        .env_remove("ROBEX_SOLVER")
        .output()
        .unwrap();
    let mut bytes = out.stdout;
    bytes.extend(out.status.code().unwrap_or(-1).to_string().bytes());
    bytes
}

fn criterion_9(first: &[(&str, std::thread::Result<Outcome>)]) -> Outcome {
    let fingerprint = |runs: &[(&str, std::thread::Result<Outcome>)]| -> Vec<String> {
        runs.iter()
            .map(|(_, r)| match r {
                Ok(o) => serde_json::to_string(&o.data).unwrap(),
                Err(_) => "panicked".into(),
            })
            .collect()
    };
    let second = run_criteria();
    let same_library = fingerprint(first) == fingerprint(&second);

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    Command::new(BIN)
        .args(["gen", "--dir", d, "--count", "5", "--seed", "11"])
        .output()
        .unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["demo", "--seed", "7"],
        vec!["global", "--model", "builtin:kappa1", "--eps", "0.01"],
        vec![
            "robust",
            "--model",
            "builtin:kappa1",
            "--point",
            "0.7",
            "--eps",
            "0.1",
            "--samples",
            "100",
        ],
        vec![
            "explain",
            "enumerate",
            "--model",
            "builtin:kappa2",
            "--point",
            "0,1",
            "--eps",
            "0.7",
        ],
        vec!["bench", "--dir", d],
    ];
    let mut differing = Vec::new();
    for c in &commands {
        for format in ["json", "csv"] {
            let args: Vec<&str> = c
                .iter()
                .copied()
                .chain(["--format", format, "--deterministic"])
                .collect();
            if cli_bytes(&args) != cli_bytes(&args) {
                differing.push(format!("{} ({format})", c[0]));
            }
        }
    }
    let detail = format!(
        "criteria 1-8 rerun: {}; {} CLI commands x 2 formats: {}",
        if same_library { "identical" } else { "different" },
        commands.len(),
        if differing.is_empty() {
            "byte-identical".to_string()
        } else {
            format!("differ: {}", differing.join(", "))
        }
    );
    outcome(same_library && differing.is_empty(), detail, Value::Null)
}

fn main() {
    let start = Instant::now();
    let first = run_criteria();
    let ninth = catch_unwind(AssertUnwindSafe(|| criterion_9(&first)));
    let mut all = true;
    let lines = first
        .iter()
        .map(|(name, r)| (*name, r.as_ref().map_err(|_| ())))
        .chain(std::iter::once(("determinism", ninth.as_ref().map_err(|_| ()))));
    for (k, (name, r)) in lines.enumerate() {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail.clone()),
            Err(()) => (false, "panicked".to_string()),
        };
        all &= pass;
        println!(
            "criterion {} [{name}]: {} ({detail})",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} in {:.1}s",
        if all { "all passed" } else { "FAILED" },
        start.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
