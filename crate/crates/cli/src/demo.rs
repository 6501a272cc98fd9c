use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use robex::explain::{enumerate_explanations, plain_explanation, ExplanationKind};
use robex::model::fixtures::{build_kappa1, build_kappa2, kappa1_training_data};
use robex::robustness::{
    certify_demo, find_aex, find_global_counterexample, find_global_counterexample_delta, find_transition_point,
    is_locally_robust, local_flip_threshold, AexResult, GlobalResult, RobustnessVerdict, SampleVerdict, SamplingConfig,
};
use robex::{BigRational, DistanceSpec, ExplanationProblem, Norm, Scalar};
use serde_json::Value;

use crate::args::{RunArgs, DEFAULT_QS};
use crate::report::{num, point_json, point_text, set_json, set_text, Obj, Report};

fn verdict_text(v: &RobustnessVerdict<f64>) -> &'static str {
    match v {
        RobustnessVerdict::Robust => "Robust",
        RobustnessVerdict::NotRobust(_) => "NotRobust",
        RobustnessVerdict::Unknown(_) => "Unknown",
    }
}

fn linf(e: f64) -> Result<DistanceSpec<f64>> {
    Ok(DistanceSpec::new(Norm::LInf, e)?)
}

pub fn cmd_demo(a: &RunArgs) -> Result<Report> {
    let settings = a.settings()?;
    let k1 = build_kappa1::<f64>();
    let k2 = build_kappa2::<f64>();
    let mut h = String::new();
    let mut obj = Obj::new(a.deterministic).set("command", "demo");

    // the one-feature linear model and its class boundary
    let t = find_transition_point(&k1, &[0.4], &[0.7], &1e-9, Norm::LInf)?;
    let _ = writeln!(h, "kappa1: class 1 iff 0.93198992*x1 - 0.64735516 >= 0 on [0, 1]");
    let _ = writeln!(h, "  class changes at x1 = {:.8}", t.point[0]);
    obj = obj.set("transition", num(t.point[0]));

    let exact = build_kappa1::<BigRational>();
    let v_exact = vec![BigRational::parse_decimal("0.7").unwrap()];
    let e_exact = ExplanationProblem::predicted(&exact, v_exact)?;
    let flip = local_flip_threshold(&e_exact, Norm::LInf, &BigRational::from_integer(0.into()), &settings)?;
    let flip_f = f64::from_rational(&flip.epsilon);
    let _ = writeln!(
        h,
        "  v = 0.7 stops being linf-robust beyond eps = {flip_f:.8} (exact {})",
        flip.epsilon
    );
    obj = obj
        .set("flip_threshold", num(flip_f))
        .set("flip_threshold_exact", flip.epsilon.to_string());

    let e1 = ExplanationProblem::predicted(&k1, vec![0.7])?;
    let aex = match find_aex(&e1, &linf(0.1)?, &[], &settings)? {
        AexResult::Found(x) => x,
        other => return Err(anyhow!("expected an adversarial example at eps 0.1, got {other:?}")),
    };
    let _ = writeln!(
        h,
        "  eps 0.1: adversarial example {} with class {}",
        point_text(&aex),
        k1.evaluate(&aex)?
    );
    obj = obj.set("aex_eps_0.1", point_json(&aex));
    let mut local = Vec::new();
    for eps in [0.005, 0.006] {
        let v = is_locally_robust(&e1, &linf(eps)?, None, &settings)?;
        let _ = writeln!(h, "  eps {eps}: {}", verdict_text(&v));
        local.push(
            Obj::new(true)
                .set("eps", num(eps))
                .set("verdict", verdict_text(&v))
                .build(),
        );
    }
    obj = obj.set("local", Value::Array(local));

    // sampling versus complete reasoning at the training points
    let points: Vec<Vec<f64>> = kappa1_training_data::<f64>()
        .into_iter()
        .map(|(x, _)| vec![x])
        .collect();
    let cfg = SamplingConfig::uniform(1000, a.seed);
    let report = certify_demo(&k1, &linf(0.005)?, &points, &cfg, &settings)?;
    let _ = writeln!(h, "\ncertification attempt at eps 0.005 over the training points:");
    let _ = writeln!(h, "  {:<8} {:<22} complete", "point", "sampled");
    let mut rows = Vec::new();
    for r in &report.rows {
        let sampled = match &r.sampled {
            SampleVerdict::NoAExFound(n) => format!("no AEx in {n}"),
            SampleVerdict::AExFound(x) => format!("AEx {}", point_text(x)),
        };
        let _ = writeln!(
            h,
            "  {:<8} {:<22} {}",
            num(r.point[0]),
            sampled,
            verdict_text(&r.complete)
        );
        rows.push(
            Obj::new(true)
                .set("point", num(r.point[0]))
                .set("sampled", sampled)
                .set("complete", verdict_text(&r.complete))
                .build(),
        );
    }
    if let GlobalResult::Found { v, x } = &report.refutation {
        let _ = writeln!(
            h,
            "  yet {} (class {}) and {} (class {}) lie within 0.005: the model is not robust everywhere",
            point_text(v),
            k1.evaluate(v)?,
            point_text(x),
            k1.evaluate(x)?
        );
        obj = obj.set("refutation", Value::Array(vec![point_json(v), point_json(x)]));
    }
    obj = obj.set("certify", Value::Array(rows));

    // solver-based global query on the quantized model
    let q = k1.quantized(&DEFAULT_QS)?;
    if let GlobalResult::Found { v, x } = find_global_counterexample(&q, &linf(0.01)?, &settings)? {
        let _ = writeln!(
            h,
            "\nquantized (qs {DEFAULT_QS}), eps 0.01: {} vs {}",
            point_text(&v),
            point_text(&x)
        );
        obj = obj.set("quantized_pair", Value::Array(vec![point_json(&v), point_json(&x)]));
    }
    for (eps, delta) in [(0.1, 0.05), (0.01, 0.05)] {
        let gap = find_global_counterexample_delta(&k1, &linf(eps)?, &delta)?;
        let text = match &gap {
            Some((v, x)) => format!(
                "score gap above {delta} between {} and {}",
                point_text(v),
                point_text(x)
            ),
            None => format!("no score gap above {delta}"),
        };
        let _ = writeln!(h, "eps {eps}: {text}");
    }

    // explanations for the two-feature model
    let _ = writeln!(h, "\nkappa2 at v = (0, 1), class {}:", k2.evaluate(&[0.0, 1.0])?);
    let e2 = ExplanationProblem::predicted(&k2, vec![0.0, 1.0])?;
    let mut expl = Vec::new();
    for eps in [0.5, 0.7] {
        let l = enumerate_explanations(&e2, &linf(eps)?, None, &settings)?;
        let ax: Vec<String> = l.axps.iter().map(|s| set_text(s)).collect();
        let cx: Vec<String> = l.cxps.iter().map(|s| set_text(s)).collect();
        let _ = writeln!(h, "  linf eps {eps}: AXps [{}], CXps [{}]", ax.join(" "), cx.join(" "));
        expl.push(
            Obj::new(true)
                .set("eps", num(eps))
                .set("axps", Value::Array(l.axps.iter().map(|s| set_json(s)).collect()))
                .set("cxps", Value::Array(l.cxps.iter().map(|s| set_json(s)).collect()))
                .set("complete", l.complete)
                .build(),
        );
    }
    let pa = plain_explanation(&e2, ExplanationKind::Axp, &settings)?;
    let pc = plain_explanation(&e2, ExplanationKind::Cxp, &settings)?;
    let _ = writeln!(
        h,
        "  unrestricted: AXp {}, CXp {}",
        set_text(&pa.features),
        set_text(&pc.features)
    );
    obj = obj
        .set("kappa2", Value::Array(expl))
        .set("plain_axp", set_json(&pa.features))
        .set("plain_cxp", set_json(&pc.features));
    Ok(Report::new(0, h, obj.build()))
}
