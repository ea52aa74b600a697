//! Command line parsing and the four subcommands.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use lassocd_core::simgen::{self, run_replicate, summarize, Noise, ReplicateOutcome, SimConfig, StudySpec};
use lassocd_core::standardize::{standardize, Standardization};
use lassocd_core::tuning::{
    default_lambda0, kfold_split, reestimate_active, tune, CvCurve, CvData, SearchSpec, Slice, Solver,
    TuneOptions, TuningValue, DEFAULT_REDUCTION, DEFAULT_TOL_REL,
};
use lassocd_core::{DesignMatrix, FitConfig, FitResult, GroupStructure, LossKind, ParameterVector, Problem, Strategy};

use crate::atomic::Outputs;
use crate::clock::WallClock;
use crate::config::KeyValues;
use crate::formats::{self, Dataset, PathRow, ResponseColumn};

/// Exit status of a fit that stopped without meeting the convergence test.
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lassocd", version, about = "Lasso-penalized l1 and l2 regression by coordinate descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit at fixed tuning constants.
    Fit(FitArgs),
    /// Choose the tuning constant by k-fold cross-validation.
    Cv(CvArgs),
    /// Trace fits along a descending geometric grid.
    Path(PathArgs),
    /// Replicated simulation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    L1,
    L2,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::L1 => LossKind::L1,
            LossArg::L2 => LossKind::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Cyclic,
    Greedy,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Cyclic => Strategy::Cyclic,
            StrategyArg::Greedy => Strategy::Greedy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SliceArg {
    /// lambda1 = 0
    GroupOnly,
    /// lambda2 = 0
    LassoOnly,
    /// lambda1 = lambda2
    Equal,
}

impl From<SliceArg> for Slice {
    fn from(s: SliceArg) -> Self {
        match s {
            SliceArg::GroupOnly => Slice::GroupOnly,
            SliceArg::LassoOnly => Slice::LassoOnly,
            SliceArg::Equal => Slice::Equal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Normal,
    Laplace,
    Zero,
}

impl From<NoiseArg> for Noise {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Normal => Noise::Normal,
            NoiseArg::Laplace => Noise::Laplace,
            NoiseArg::Zero => Noise::Zero,
        }
    }
}

fn value_enum<T: ValueEnum>(s: &str) -> anyhow::Result<T> {
    T::from_str(s, true).map_err(|e| anyhow!(e))
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Response column, by header name or 0-based index.
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Standardize predictors before fitting. Coefficients are reported on
    /// the original scale.
    #[arg(long)]
    pub standardize: bool,
    /// Group table (predictor,group); selects the group penalty.
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = LossArg::L2)]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::Cyclic)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 10_000)]
    pub max_sweeps: usize,
    /// Relative objective change that ends a fit.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_obj: f64,
}

impl SolverArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            max_sweeps: self.max_sweeps,
            tol_obj: self.tol_obj,
            ..FitConfig::default().with_strategy(self.strategy.into())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Lasso tuning constant.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Group penalty: weight of the l1 part.
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Group penalty: weight of the group-norm part.
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Report the unpenalized refit of the active set.
    #[arg(long)]
    pub reestimate: bool,
    /// Coefficient table to start from.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Coefficient table to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the run summary record here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Recorded in the summary; fits use no randomness.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// `bracket[:R[,LAMBDA0]]` or `grid:LAMBDA0,R,COUNT`. `LAMBDA0` may be
/// `auto`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchArg {
    Bracket { r: f64, lambda0: Option<f64> },
    Grid { lambda0: Option<f64>, r: f64, count: usize },
}

fn parse_lambda0(s: &str) -> anyhow::Result<Option<f64>> {
    if s == "auto" {
        return Ok(None);
    }
    let v: f64 = s.parse().map_err(|_| anyhow!("bad lambda0 '{s}'"))?;
    if !(v > 0.0) || !v.is_finite() {
        bail!("lambda0 must be positive");
    }
    Ok(Some(v))
}

fn parse_ratio(s: &str) -> anyhow::Result<f64> {
    let r: f64 = s.parse().map_err(|_| anyhow!("bad reduction proportion '{s}'"))?;
    if !(r > 0.0 && r < 1.0) {
        bail!("reduction proportion must lie in (0, 1)");
    }
    Ok(r)
}

/// `LAMBDA0,R,COUNT`.
fn parse_geometric(s: &str) -> anyhow::Result<(Option<f64>, f64, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [l0, r, count] = parts[..] else {
        bail!("expected LAMBDA0,R,COUNT, got '{s}'");
    };
    let count: usize = count.parse().map_err(|_| anyhow!("bad count '{count}'"))?;
    if count == 0 {
        bail!("grid count must be at least 1");
    }
    Ok((parse_lambda0(l0)?, parse_ratio(r)?, count))
}

impl FromStr for SearchArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "bracket" => {
                let mut parts = rest.split(',').map(str::trim).filter(|p| !p.is_empty());
                let r = parts.next().map(parse_ratio).transpose()?.unwrap_or(DEFAULT_REDUCTION);
                let lambda0 = parts.next().map(parse_lambda0).transpose()?.flatten();
                if parts.next().is_some() {
                    bail!("expected bracket[:R[,LAMBDA0]]");
                }
                Ok(Self::Bracket { r, lambda0 })
            }
            "grid" => {
                let (lambda0, r, count) = parse_geometric(rest)?;
                Ok(Self::Grid { lambda0, r, count })
            }
            _ => bail!("unknown search '{s}'; use bracket[:R[,LAMBDA0]] or grid:LAMBDA0,R,COUNT"),
        }
    }
}

fn geometric(lambda0: f64, r: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lambda0 * r.powi(i as i32)).collect()
}

impl SearchArg {
    /// Core search spec; `auto_lambda0` is consulted for a grid without a
    /// start.
    fn spec(&self, tol: f64, slice: Slice, auto_lambda0: Option<f64>) -> anyhow::Result<SearchSpec> {
        Ok(match *self {
            Self::Bracket { r, lambda0 } => SearchSpec::BracketGolden { lambda0, r, tol_rel: tol },
            Self::Grid { lambda0, r, count } => {
                let l0 = lambda0
                    .or(auto_lambda0)
                    .ok_or_else(|| anyhow!("a grid search here needs an explicit LAMBDA0"))?;
                SearchSpec::Grid {
                    values: geometric(l0, r, count),
                    slice,
                }
            }
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// bracket[:R[,LAMBDA0]] or grid:LAMBDA0,R,COUNT.
    #[arg(long, default_value = "bracket")]
    pub search: SearchArg,
    /// Golden section stops when the interval is narrower than TOL times
    /// its upper end.
    #[arg(long, default_value_t = DEFAULT_TOL_REL)]
    pub tol: f64,
    /// Penalty slice for a grid search under the group penalty.
    #[arg(long, value_enum, default_value_t = SliceArg::Equal)]
    pub slice: SliceArg,
    /// Score folds with the penalized fit instead of the unpenalized refit.
    #[arg(long)]
    pub no_reestimate: bool,
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coefficient table at the selected constant.
    #[arg(long)]
    pub out: PathBuf,
    /// Cross-validation curve (TSV).
    #[arg(long)]
    pub curve: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// LAMBDA0,R,COUNT; LAMBDA0 may be `auto`.
    #[arg(long)]
    pub lambda_grid: String,
    /// Penalty slice under the group penalty.
    #[arg(long, value_enum, default_value_t = SliceArg::Equal)]
    pub slice: SliceArg,
    /// Add a cross-validation error column with this many folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Training error of the unpenalized refit instead of the penalized fit.
    #[arg(long)]
    pub reestimate: bool,
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path table (TSV).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// key = value file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// bracket[:R[,LAMBDA0]] or grid:LAMBDA0,R,COUNT.
    #[arg(long)]
    pub search: Option<SearchArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also locate the test-error-optimal constant of each replicate.
    #[arg(long)]
    pub test_optimal: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replicates; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Replicate table (TSV).
    #[arg(long)]
    pub out: PathBuf,
    /// Summary table (TSV); it is printed either way.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

const SIMULATE_KEYS: [&str; 16] = [
    "p",
    "n",
    "n-test",
    "rho",
    "noise",
    "mu",
    "replicates",
    "loss",
    "strategy",
    "folds",
    "search",
    "tol",
    "test-optimal",
    "seed",
    "jobs",
    "max-sweeps",
];

/// Runs the command line `args` (program name first), returning the exit
/// status. Diagnostics go to `err` as a single line.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "lassocd: {line}");
            return EXIT_ERROR;
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Cv(a) => cmd_cv(a, out, err),
        Command::Path(a) => cmd_path(a, err),
        Command::Simulate(a) => cmd_simulate(a, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            let _ = writeln!(err, "lassocd: error: {msg}");
            EXIT_ERROR
        }
    }
}

fn seed_or_generate(seed: Option<u64>, err: &mut dyn Write) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        let _ = writeln!(err, "lassocd: seed {s}");
        s
    })
}

/// Dataset, fitting design (standardized when asked) and group structure.
struct Loaded {
    data: Dataset,
    x: DesignMatrix,
    scaling: Option<Standardization>,
    groups: Option<GroupStructure>,
}

impl Loaded {
    fn new(args: &DataArgs, loss: LossKind) -> anyhow::Result<Self> {
        let data = formats::read_dataset(&args.input, &ResponseColumn(args.response.clone()))
            .with_context(|| args.input.display().to_string())?;
        let groups = match &args.groups {
            Some(path) => {
                if loss != LossKind::L2 {
                    bail!("group penalties need --loss l2");
                }
                Some(formats::read_groups(path, data.predictor_names()).with_context(|| path.display().to_string())?)
            }
            None => None,
        };
        let (x, scaling) = if args.standardize {
            let (x, st) = standardize(&data.x)?;
            (x, Some(st))
        } else {
            (data.x.clone(), None)
        };
        Ok(Self {
            data,
            x,
            scaling,
            groups,
        })
    }

    fn solver(&self, args: &SolverArgs) -> Solver {
        let config = args.config();
        match &self.groups {
            Some(g) => Solver::group(g.clone(), config),
            None => Solver::lasso(args.loss.into(), config),
        }
    }

    fn y(&self) -> &[f64] {
        &self.data.y
    }

    /// Parameters on the original predictor scale.
    fn original(&self, theta: &ParameterVector) -> ParameterVector {
        match &self.scaling {
            Some(st) => st.back_transform(theta),
            None => theta.clone(),
        }
    }

    fn fitting(&self, theta: &ParameterVector) -> ParameterVector {
        match &self.scaling {
            Some(st) => st.forward_transform(theta),
            None => theta.clone(),
        }
    }

    fn write_coefficients(&self, w: &mut dyn Write, theta: &ParameterVector, active: &[usize]) -> anyhow::Result<()> {
        let mut flags = vec![false; theta.beta.len()];
        for &k in active {
            flags[k] = true;
        }
        formats::write_coefficients(w, self.data.predictor_names(), &self.original(theta), &flags)?;
        Ok(())
    }
}

fn lambda_json(value: TuningValue) -> serde_json::Value {
    match value {
        TuningValue::Lasso(l) => serde_json::json!({ "lambda": l }),
        TuningValue::Group { lambda1, lambda2 } => serde_json::json!({ "lambda1": lambda1, "lambda2": lambda2 }),
    }
}

fn check_lambda(v: f64, name: &str) -> anyhow::Result<f64> {
    if !(v >= 0.0) || !v.is_finite() {
        bail!("--{name} must be finite and nonnegative");
    }
    Ok(v)
}

fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let loss: LossKind = args.solver.loss.into();
    let loaded = Loaded::new(&args.data, loss)?;
    let value = match (&loaded.groups, args.lambda) {
        (None, Some(l)) => {
            if args.lambda1.is_some() || args.lambda2.is_some() {
                bail!("--lambda1/--lambda2 need --groups");
            }
            TuningValue::Lasso(check_lambda(l, "lambda")?)
        }
        (None, None) => bail!("--lambda is required"),
        (Some(_), Some(_)) => bail!("with --groups use --lambda1 and --lambda2"),
        (Some(_), None) => TuningValue::Group {
            lambda1: check_lambda(args.lambda1.unwrap_or(0.0), "lambda1")?,
            lambda2: check_lambda(args.lambda2.unwrap_or(0.0), "lambda2")?,
        },
    };
    let warm = match &args.warm_start {
        Some(path) => Some(loaded.fitting(
            &formats::read_coefficients(path, loaded.data.predictor_names())
                .with_context(|| path.display().to_string())?,
        )),
        None => None,
    };
    let solver = loaded.solver(&args.solver);
    let problem = Problem::new(&loaded.x, loaded.y())?;
    let clock = std::time::Instant::now();
    let fit = solver.fit(&problem, value, warm.as_ref())?;
    let seconds = clock.elapsed().as_secs_f64();
    let refit = if args.reestimate {
        Some(reestimate_active(
            loss,
            &loaded.x,
            loaded.y(),
            &fit.active_set,
            loaded.groups.as_ref(),
            &solver.config,
        )?)
    } else {
        None
    };
    let reported = refit.as_ref().map_or(&fit.theta, |r| &r.theta);

    let mut record = serde_json::json!({
        "command": "fit",
        "loss": loss_name(loss),
        "strategy": strategy_name(solver.config.strategy),
        "objective": fit.objective,
        "sweeps": fit.sweeps,
        "updates": fit.updates,
        "visits": fit.visits,
        "converged": fit.converged,
        "n_nonzero": fit.active_set.len(),
        "seconds": seconds,
    });
    merge(&mut record, lambda_json(value));
    if let Some(r) = &refit {
        merge(&mut record, serde_json::json!({ "reestimated_loss": r.objective }));
    }
    if let Some(s) = args.seed {
        merge(&mut record, serde_json::json!({ "seed": s }));
    }
    let line = serde_json::to_string(&record)?;

    let mut outputs = Outputs::new();
    outputs.stage(&args.out, |w| loaded.write_coefficients(w, reported, &fit.active_set))?;
    if let Some(path) = &args.summary {
        outputs.stage(path, |w| Ok(writeln!(w, "{line}")?))?;
    }
    outputs.commit()?;
    writeln!(out, "{line}")?;
    Ok(exit_for(&fit))
}

fn merge(into: &mut serde_json::Value, from: serde_json::Value) {
    if let (Some(a), serde_json::Value::Object(b)) = (into.as_object_mut(), from) {
        a.extend(b);
    }
}

fn loss_name(loss: LossKind) -> &'static str {
    match loss {
        LossKind::L1 => "l1",
        LossKind::L2 => "l2",
    }
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Cyclic => "cyclic",
        Strategy::Greedy => "greedy",
    }
}

fn exit_for(fit: &FitResult) -> i32 {
    if fit.converged {
        0
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn cmd_cv(args: &CvArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<i32> {
    if !(args.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let loss: LossKind = args.solver.loss.into();
    let loaded = Loaded::new(&args.data, loss)?;
    let solver = loaded.solver(&args.solver);
    let seed = seed_or_generate(args.seed, err);
    let folds = kfold_split(loaded.data.y.len(), args.folds, seed)?;
    let auto = default_lambda0(loss, &loaded.x, loaded.y())?;
    let slice = if loaded.groups.is_some() { args.slice.into() } else { Slice::Lasso };
    let search = args.search.spec(args.tol, slice, Some(auto))?;
    let options = TuneOptions {
        reestimate: !args.no_reestimate,
        warm_start: !args.no_warm_start,
        ..TuneOptions::default()
    };
    let result = tune(&solver, &loaded.x, loaded.y(), &search, &folds, &options)?;

    let mut outputs = Outputs::new();
    outputs.stage(&args.curve, |w| Ok(formats::write_curve(w, &result.curve)?))?;
    outputs.stage(&args.out, |w| {
        loaded.write_coefficients(w, &result.refit.theta, &result.penalized.active_set)
    })?;
    outputs.commit()?;
    match result.best {
        TuningValue::Lasso(l) => writeln!(out, "lambda\t{l}")?,
        TuningValue::Group { lambda1, lambda2 } => writeln!(out, "lambda1\t{lambda1}\nlambda2\t{lambda2}")?,
    }
    writeln!(out, "cv_error\t{}", result.best_cv)?;
    Ok(exit_for(&result.penalized))
}

fn cmd_path(args: &PathArgs, err: &mut dyn Write) -> anyhow::Result<i32> {
    let loss: LossKind = args.solver.loss.into();
    let loaded = Loaded::new(&args.data, loss)?;
    let solver = loaded.solver(&args.solver);
    let (lambda0, r, count) = parse_geometric(&args.lambda_grid).context("--lambda-grid")?;
    let lambda0 = match lambda0 {
        Some(l) => l,
        None => default_lambda0(loss, &loaded.x, loaded.y())?,
    };
    let slice: Slice = if loaded.groups.is_some() { args.slice.into() } else { Slice::Lasso };
    let grid = geometric(lambda0, r, count);

    let cv = match args.folds {
        Some(k) => {
            let seed = seed_or_generate(args.seed, err);
            let folds = kfold_split(loaded.data.y.len(), k, seed)?;
            Some(CvData::new(&loaded.x, loaded.y(), &folds)?)
        }
        None => None,
    };
    let options = TuneOptions {
        warm_start: !args.no_warm_start,
        ..TuneOptions::default()
    };
    let mut curve = cv.as_ref().map(|d| CvCurve::new(&solver, d, slice, &options));

    let problem = Problem::new(&loaded.x, loaded.y())?;
    let mut warm: Option<ParameterVector> = None;
    let mut rows = Vec::with_capacity(grid.len());
    let mut all_converged = true;
    for &s in &grid {
        let value = slice.value(s);
        let fit = solver.fit(&problem, value, warm.as_ref().filter(|_| !args.no_warm_start))?;
        let scored = if args.reestimate {
            reestimate_active(loss, &loaded.x, loaded.y(), &fit.active_set, loaded.groups.as_ref(), &solver.config)?
                .theta
        } else {
            fit.theta.clone()
        };
        let cv_error = match curve.as_mut() {
            Some(c) => Some(c.eval(s)?),
            None => None,
        };
        all_converged &= fit.converged;
        rows.push(PathRow {
            lambda: value,
            objective: fit.objective,
            n_nonzero: fit.active_set.len(),
            cv_error,
            train_error: simgen::evaluate(loss, &scored, &loaded.x, loaded.y())?,
            converged: fit.converged,
        });
        warm = Some(fit.theta);
    }

    let mut outputs = Outputs::new();
    outputs.stage(&args.out, |w| Ok(formats::write_path(w, &rows)?))?;
    outputs.commit()?;
    Ok(if all_converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<i32> {
    let file = match &args.config {
        Some(path) => {
            let kv = KeyValues::read(path)?;
            kv.check_keys(&SIMULATE_KEYS)?;
            kv
        }
        None => KeyValues::default(),
    };
    let enum_key = |key: &str| -> anyhow::Result<Option<String>> { file.get::<String>(key) };
    let p = args.p.or(file.get("p")?).unwrap_or(2000);
    let n = args.n.or(file.get("n")?).unwrap_or(200);
    let rho = args.rho.or(file.get("rho")?).unwrap_or(0.0);
    let noise: NoiseArg = match args.noise {
        Some(v) => v,
        None => enum_key("noise")?.map(|s| value_enum(&s)).transpose()?.unwrap_or(NoiseArg::Normal),
    };
    let loss: LossArg = match args.loss {
        Some(v) => v,
        None => enum_key("loss")?.map(|s| value_enum(&s)).transpose()?.unwrap_or(LossArg::L2),
    };
    let strategy: StrategyArg = match args.strategy {
        Some(v) => v,
        None => enum_key("strategy")?.map(|s| value_enum(&s)).transpose()?.unwrap_or(StrategyArg::Cyclic),
    };
    let search: SearchArg = match args.search {
        Some(s) => s,
        None => file.get::<SearchArg>("search")?.unwrap_or(SearchArg::Bracket {
            r: DEFAULT_REDUCTION,
            lambda0: None,
        }),
    };
    let tol = args.tol.or(file.get("tol")?).unwrap_or(DEFAULT_TOL_REL);
    let replicates = args.replicates.or(file.get("replicates")?).unwrap_or(20);
    let folds = args.folds.or(file.get("folds")?).unwrap_or(10);
    let test_optimal = args.test_optimal || file.get::<bool>("test-optimal")?.unwrap_or(false);
    let jobs = args.jobs.or(file.get("jobs")?);
    let max_sweeps = args.max_sweeps.or(file.get("max-sweeps")?).unwrap_or(FitConfig::default().max_sweeps);
    if replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    if !(tol > 0.0) {
        bail!("--tol must be positive");
    }
    let seed = match args.seed.or(file.get("seed")?) {
        Some(s) => s,
        None => seed_or_generate(None, err),
    };

    let mut config = SimConfig::new(p, n, rho, noise.into(), seed);
    if let Some(t) = args.n_test.or(file.get("n-test")?) {
        config.n_test = t;
    }
    if let Some(m) = args.mu.or(file.get("mu")?) {
        config.mu_true = m;
    }
    config.validate()?;
    let fit_config = FitConfig {
        max_sweeps,
        ..FitConfig::default().with_strategy(strategy.into())
    };
    let mut spec = StudySpec::new(Solver::lasso(loss.into(), fit_config));
    spec.search = search.spec(tol, Slice::Lasso, None)?;
    spec.folds = folds;
    spec.test_optimal = test_optimal;
    if folds < 2 || folds > n {
        bail!("--folds must lie in [2, n]");
    }

    let clock = WallClock::new();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build()?;
    let rows: Vec<ReplicateOutcome> = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| run_replicate(&config, &spec, r, &clock))
            .collect()
    });
    let summary = summarize(&rows);

    let mut outputs = Outputs::new();
    outputs.stage(&args.out, |w| Ok(formats::write_study(w, &rows)?))?;
    if let Some(path) = &args.summary {
        outputs.stage(path, |w| Ok(formats::write_summary(w, &summary)?))?;
    }
    outputs.commit()?;
    formats::write_summary(&mut *out, &summary)?;
    for o in &rows {
        if let Err(e) = &o.result {
            let _ = writeln!(err, "lassocd: replicate {} failed: {e}", o.replicate);
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_specs_parse() {
        assert_eq!(
            "bracket".parse::<SearchArg>().unwrap(),
            SearchArg::Bracket {
                r: DEFAULT_REDUCTION,
                lambda0: None
            }
        );
        assert_eq!(
            "bracket:0.5,10".parse::<SearchArg>().unwrap(),
            SearchArg::Bracket {
                r: 0.5,
                lambda0: Some(10.0)
            }
        );
        assert_eq!(
            "grid:auto,0.5,4".parse::<SearchArg>().unwrap(),
            SearchArg::Grid {
                lambda0: None,
                r: 0.5,
                count: 4
            }
        );
        for bad in ["bracket:1.5", "grid:1,0.5", "grid:1,0.5,0", "golden", "bracket:0.5,-1"] {
            assert!(bad.parse::<SearchArg>().is_err(), "{bad}");
        }
    }

    #[test]
    fn geometric_grid() {
        assert_eq!(geometric(8.0, 0.5, 4), vec![8.0, 4.0, 2.0, 1.0]);
    }
}
