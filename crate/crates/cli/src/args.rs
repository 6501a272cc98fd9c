use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use robex::encode::TextFormat;
use robex::model::dataset::Dataset;
use robex::model::fixtures::{build_kappa1, build_kappa2};
use robex::model::io::load_model;
use robex::oracle::{Backend, Budget, ExternalSolver, Settings};
use robex::robustness::{ConstraintSet, GlobalMethod};
use robex::{Classifier, DistanceSpec, Norm, Scalar};

/// Environment variable naming the default external solver command.
pub const SOLVER_ENV: &str = "ROBEX_SOLVER";

/// Quantization step applied to real features when a command needs a
/// discrete space and none was given.
pub const DEFAULT_QS: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "robex",
    version,
    about = "Robustness queries and explanations for classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide local robustness of one instance.
    Robust(RobustArgs),
    /// Search for two nearby points with different classes.
    Global(GlobalArgs),
    /// Compute abductive or contrastive explanations.
    Explain(ExplainArgs),
    /// Walk through the two built-in example models.
    Demo(RunArgs),
    /// Global queries over every model in a directory.
    Bench(BenchArgs),
    /// Write seeded random binarized networks.
    Gen(GenArgs),
    /// Solve a DIMACS CNF file with the embedded solver.
    Sat(SatArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverFormat {
    Cnf,
    Opb,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model file, or `builtin:kappa1` / `builtin:kappa2`.
    #[arg(long)]
    pub model: String,
    /// Quantize real features with this step.
    #[arg(long)]
    pub qs: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Comma-separated feature values.
    #[arg(long, conflicts_with = "dataset")]
    pub point: Option<String>,
    /// Delimiter-separated dataset with a header row.
    #[arg(long, requires = "row")]
    pub dataset: Option<PathBuf>,
    /// 1-based data row of `--dataset`.
    #[arg(long)]
    pub row: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BallArgs {
    #[arg(long, default_value = "linf")]
    pub norm: Norm,
    /// Ball radius (decimal or p/q).
    #[arg(long)]
    pub eps: String,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// `embedded`, or `cmd:<command>` for an external solver.
    #[arg(long)]
    pub solver: Option<String>,
    /// File format handed to an external solver.
    #[arg(long, value_enum, default_value = "cnf")]
    pub solver_format: SolverFormat,
    /// Per-query wall-clock limit in seconds.
    #[arg(long)]
    pub limit_time: Option<f64>,
    /// Per-query conflict limit of the embedded solver.
    #[arg(long)]
    pub limit_conflicts: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "human")]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave out timings so identical runs give identical output.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct RobustArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub ball: BallArgs,
    /// Input constraint such as `1>=0.695`, `2<=3` or `1=0` (repeatable).
    #[arg(long = "constrain")]
    pub constraints: Vec<String>,
    /// Also run naive sampling with this many samples.
    #[arg(long)]
    pub samples: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Grid walk first, dual-copy encoding as fallback.
    Auto,
    /// Always the dual-copy encoding.
    DualCopy,
}

impl From<Method> for GlobalMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Auto => GlobalMethod::Auto,
            Method::DualCopy => GlobalMethod::DualCopy,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub ball: BallArgs,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainKind {
    Axp,
    Cxp,
    Enumerate,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(value_enum)]
    pub kind: ExplainKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Ball radius; omit for unrestricted (Hamming, every feature) explanations.
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long, default_value = "linf")]
    pub norm: Norm,
    /// Stop enumeration after this many explanations.
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of model files (`*.json`).
    #[arg(long)]
    pub dir: PathBuf,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: Method,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of binary inputs (random 8..=32 when omitted).
    #[arg(long)]
    pub inputs: Option<usize>,
    /// Hidden block widths such as `16,8` (random when omitted).
    #[arg(long)]
    pub hidden: Option<String>,
}

#[derive(Debug, Args)]
pub struct SatArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub limit_conflicts: Option<u64>,
    #[arg(long)]
    pub limit_time: Option<f64>,
}

pub fn parse_scalar(text: &str, what: &str) -> Result<f64> {
    f64::parse_decimal(text).ok_or_else(|| anyhow!("{what}: `{text}` is not a number"))
}

impl ModelArgs {
    pub fn load(&self) -> Result<Classifier<f64>> {
        let clf = match self.model.as_str() {
            "builtin:kappa1" => build_kappa1(),
            "builtin:kappa2" => build_kappa2(),
            path => load_model(path).with_context(|| format!("loading model `{path}`"))?,
        };
        match &self.qs {
            Some(qs) => Ok(clf.quantized(&parse_scalar(qs, "--qs")?)?),
            None => Ok(clf),
        }
    }

    /// Like `load`, but real features always end up on a grid.
    pub fn load_discrete(&self) -> Result<Classifier<f64>> {
        let clf = self.load()?;
        if clf.space().is_discrete() {
            return Ok(clf);
        }
        Ok(clf.quantized(&DEFAULT_QS)?)
    }
}

impl InstanceArgs {
    pub fn point(&self, dim: usize) -> Result<Vec<f64>> {
        let point = match (&self.point, &self.dataset) {
            (Some(text), _) => text
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| parse_scalar(s, "--point"))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(path)) => {
                let data = Dataset::<f64>::load(path, b',').with_context(|| format!("reading {}", path.display()))?;
                let row = self.row.unwrap_or(1);
                if row == 0 || row > data.len() {
                    bail!("--row {row} outside 1..={}", data.len());
                }
                data.rows[row - 1].clone()
            }
            (None, None) => bail!("give the instance with --point or --dataset/--row"),
        };
        if point.len() != dim {
            bail!("the point has {} values but the model has {dim} features", point.len());
        }
        Ok(point)
    }
}

impl BallArgs {
    pub fn spec(&self) -> Result<DistanceSpec<f64>> {
        Ok(DistanceSpec::new(self.norm, parse_scalar(&self.eps, "--eps")?)?)
    }
}

impl RunArgs {
    pub fn settings(&self) -> Result<Settings> {
        let choice = match &self.solver {
            Some(s) => s.clone(),
            None => std::env::var(SOLVER_ENV).unwrap_or_else(|_| "embedded".to_string()),
        };
        let backend = if choice == "embedded" {
            Backend::Embedded
        } else if let Some(cmd) = choice.strip_prefix("cmd:") {
            let format = match self.solver_format {
                SolverFormat::Cnf => TextFormat::Cnf,
                SolverFormat::Opb => TextFormat::Opb,
            };
            Backend::External(ExternalSolver::parse(cmd, format)?)
        } else {
            bail!("--solver must be `embedded` or `cmd:<command>`, not `{choice}`");
        };
        if self.limit_time.is_some_and(|t| t.is_nan() || t <= 0.0) {
            bail!("--limit-time must be positive");
        }
        Ok(Settings {
            backend,
            budget: Budget {
                conflicts: self.limit_conflicts,
                time: self.limit_time.map(Duration::from_secs_f64),
            },
        })
    }
}

/// Parses `--constrain` items; features are 1-based.
pub fn parse_constraints(items: &[String], dim: usize) -> Result<Option<ConstraintSet<f64>>> {
    if items.is_empty() {
        return Ok(None);
    }
    let mut set = ConstraintSet::new();
    for item in items {
        let (pos, op) = [">=", "<=", "="]
            .iter()
            .find_map(|op| item.find(op).map(|p| (p, *op)))
            .ok_or_else(|| anyhow!("constraint `{item}` needs >=, <= or ="))?;
        let feature: usize = item[..pos]
            .trim()
            .trim_start_matches('x')
            .parse()
            .with_context(|| format!("constraint `{item}`: bad feature index"))?;
        if feature == 0 || feature > dim {
            bail!("constraint `{item}`: feature outside 1..={dim}");
        }
        let value = parse_scalar(item[pos + op.len()..].trim(), "--constrain")?;
        set = match op {
            ">=" => set.at_least(feature - 1, value),
            "<=" => set.at_most(feature - 1, value),
            _ => set.equal(feature - 1, value),
        };
    }
    Ok(Some(set))
}
