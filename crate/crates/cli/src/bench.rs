use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use robex::model::generate::{random_bnn, BnnShape};
use robex::model::io::{load_model, save_model};
use robex::oracle::Settings;
use robex::robustness::{find_global_counterexample_with, GlobalMethod, GlobalResult};
use robex::{minimum_meaningful_epsilon, Body, Classifier, DistanceSpec, Norm};
use serde_json::Value;

use crate::args::{BenchArgs, GenArgs, DEFAULT_QS};
use crate::report::{num, Obj, Report, Table};

pub const TABLE1_HEADER: [&str; 9] = ["model", "m", "K", "D", "#N", "p", "eps", "AEx", "time"];

/// Depth and neuron count of a network body; zero for other bodies.
fn shape_of(clf: &Classifier<f64>) -> (usize, usize) {
    match clf.body() {
        Body::Bnn(b) => (b.depth(), b.neurons()),
        _ => (0, 0),
    }
}

fn aex_cell(aex: Option<bool>, error: Option<&str>) -> String {
    match (aex, error) {
        (_, Some(e)) => format!("error: {e}"),
        (Some(true), None) => "Yes".into(),
        (Some(false), None) => "No".into(),
        (None, None) => "Unknown".into(),
    }
}

pub fn table1_row(
    name: &str,
    clf: &Classifier<f64>,
    spec: &DistanceSpec<f64>,
    aex: Option<bool>,
    seconds: f64,
    error: Option<&str>,
    deterministic: bool,
) -> Vec<String> {
    let (d, n) = shape_of(clf);
    vec![
        name.to_string(),
        clf.dim().to_string(),
        clf.num_classes().to_string(),
        d.to_string(),
        n.to_string(),
        spec.norm.to_string(),
        num(spec.epsilon),
        aex_cell(aex, error),
        if deterministic {
            "-".into()
        } else {
            format!("{seconds:.3}")
        },
    ]
}

fn error_row(name: &str, norm: Norm, error: &str) -> Vec<String> {
    let mut row = vec![name.to_string()];
    row.extend(std::iter::repeat_n("-".to_string(), 4));
    row.extend([norm.to_string(), "-".into(), aex_cell(None, Some(error)), "-".into()]);
    row
}

/// The radius benchmarked for each norm: one changed feature for l0, one
/// grid step for l∞.
pub fn bench_spec(clf: &Classifier<f64>, norm: Norm) -> Result<DistanceSpec<f64>> {
    let eps = match norm {
        Norm::L0 => 1.0,
        _ => minimum_meaningful_epsilon(clf.space(), norm)?,
    };
    Ok(DistanceSpec::new(norm, eps)?)
}

struct Job {
    name: String,
    model: std::result::Result<Classifier<f64>, String>,
    norm: Norm,
}

fn run_job(job: &Job, settings: &Settings, method: GlobalMethod, deterministic: bool) -> (Vec<String>, Value) {
    let clf = match &job.model {
        Ok(c) => c,
        Err(e) => {
            let row = error_row(&job.name, job.norm, e);
            let v = Obj::new(true)
                .set("model", job.name.clone())
                .set("p", job.norm.to_string())
                .set("error", e.clone())
                .build();
            return (row, v);
        }
    };
    let spec = match bench_spec(clf, job.norm) {
        Ok(s) => s,
        Err(e) => return (error_row(&job.name, job.norm, &e.to_string()), Value::Null),
    };
    let start = Instant::now();
    let outcome = find_global_counterexample_with(clf, &spec, settings, method);
    let secs = start.elapsed().as_secs_f64();
    let (aex, err) = match outcome {
        Ok(GlobalResult::Found { .. }) => (Some(true), None),
        Ok(GlobalResult::None) => (Some(false), None),
        Ok(GlobalResult::Unknown(w)) => (None, Some(w)),
        Err(e) => (None, Some(e.to_string())),
    };
    let row = table1_row(&job.name, clf, &spec, aex, secs, err.as_deref(), deterministic);
    let (d, n) = shape_of(clf);
    let mut obj = Obj::new(deterministic)
        .set("model", job.name.clone())
        .set("m", clf.dim())
        .set("K", clf.num_classes())
        .set("D", d)
        .set("N", n)
        .set("p", spec.norm.to_string())
        .set("eps", num(spec.epsilon))
        .set("aex", aex.map_or(Value::Null, Value::Bool));
    if let Some(e) = err {
        obj = obj.set("error", e);
    }
    (row, obj.time("time", secs).build())
}

fn model_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<Report> {
    let settings = a.run.settings()?;
    let mut jobs = Vec::new();
    for path in model_files(&a.dir)? {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let model = load_model::<f64>(&path).map_err(|e| e.to_string()).and_then(|c| {
            if c.space().is_discrete() {
                Ok(c)
            } else {
                c.quantized(&DEFAULT_QS).map_err(|e| e.to_string())
            }
        });
        for norm in [Norm::L0, Norm::LInf] {
            jobs.push(Job {
                name: name.clone(),
                model: model.clone(),
                norm,
            });
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    let results: Vec<(Vec<String>, Value)> = pool.install(|| {
        jobs.par_iter()
            .map(|j| run_job(j, &settings, a.method.into(), a.run.deterministic))
            .collect()
    });
    let mut table = Table::new(&TABLE1_HEADER);
    let mut values = Vec::new();
    for (row, v) in results {
        table.rows.push(row);
        values.push(v);
    }
    let mut report = Report::new(0, table.aligned(), Value::Array(values));
    report.table = Some(table);
    Ok(report)
}

fn parse_widths(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("bad width `{s}` in --hidden"))
        })
        .collect()
}

pub fn cmd_gen(a: &GenArgs) -> Result<Report> {
    std::fs::create_dir_all(&a.dir).with_context(|| format!("creating {}", a.dir.display()))?;
    let hidden = a.hidden.as_deref().map(parse_widths).transpose()?;
    let mut human = String::new();
    let mut written = Vec::new();
    for i in 0..a.count {
        let seed = a.seed.wrapping_add(i as u64);
        let mut shape = BnnShape::random(seed);
        if let Some(m) = a.inputs {
            shape.inputs = m;
        }
        if let Some(h) = &hidden {
            shape.hidden = h.clone();
        }
        let clf = random_bnn::<f64>(&shape, seed)?;
        let path = a.dir.join(format!("bnn-{i:03}.json"));
        save_model(&clf, &path)?;
        let _ = writeln!(
            human,
            "{}: {} inputs, hidden {:?}, {} neurons",
            path.display(),
            shape.inputs,
            shape.hidden,
            shape_of(&clf).1
        );
        written.push(Value::String(path.display().to_string()));
    }
    Ok(Report::new(0, human, Value::Array(written)))
}
