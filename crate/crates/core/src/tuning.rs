//! Tuning-constant selection by k-fold cross-validation.
//!
//! The search walks a geometric sequence `lambda0, r lambda0, r^2 lambda0,
//! ...` downward until the cross-validation error first rises, then refines
//! the resulting bracket by golden section search. Every evaluation of the
//! error curve is memoized, and fold fits are warm started from the nearest
//! larger tuning constant already evaluated on the same fold.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::group::fit_group;
use crate::l1::{fit_l1, weighted_median, WeightedPoint};
use crate::l2::{fit_l2, FitConfig};
use crate::model::{DesignMatrix, FitResult, GroupStructure, LossKind, ParameterVector, PenaltySpec, Problem};
use crate::objective::{l1_case, objective};
use crate::residual::ResidualState;
use crate::simgen::evaluate;
use crate::model::Direction;

/// Random balanced partition of `0..n` into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Training and held-out case indices of fold `f`.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &g) in self.assignment.iter().enumerate() {
            if g == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::FoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (slot, &i) in order.iter().enumerate() {
        assignment[i] = slot % k;
    }
    Ok(FoldAssignment { k, assignment, seed })
}

/// A value of the tuning constant: one `lambda` for the lasso, a pair for
/// the group penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuningValue {
    Lasso(f64),
    Group { lambda1: f64, lambda2: f64 },
}

/// One-dimensional family of tuning values searched by a scalar `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slice {
    /// Lasso `lambda = s`.
    Lasso,
    /// Group penalty with `lambda1 = 0`, `lambda2 = s`.
    GroupOnly,
    /// Group penalty with `lambda1 = s`, `lambda2 = 0`.
    LassoOnly,
    /// Group penalty with `lambda1 = lambda2 = s`.
    Equal,
}

impl Slice {
    pub fn value(self, s: f64) -> TuningValue {
        match self {
            Self::Lasso => TuningValue::Lasso(s),
            Self::GroupOnly => TuningValue::Group {
                lambda1: 0.0,
                lambda2: s,
            },
            Self::LassoOnly => TuningValue::Group {
                lambda1: s,
                lambda2: 0.0,
            },
            Self::Equal => TuningValue::Group {
                lambda1: s,
                lambda2: s,
            },
        }
    }

    pub const GROUP_SLICES: [Slice; 3] = [Slice::GroupOnly, Slice::LassoOnly, Slice::Equal];
}

/// Loss, penalty family and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Solver {
    pub loss: LossKind,
    pub groups: Option<GroupStructure>,
    pub config: FitConfig,
}

impl Solver {
    pub fn lasso(loss: LossKind, config: FitConfig) -> Self {
        Self {
            loss,
            groups: None,
            config,
        }
    }

    pub fn group(groups: GroupStructure, config: FitConfig) -> Self {
        Self {
            loss: LossKind::L2,
            groups: Some(groups),
            config,
        }
    }

    pub fn penalty(&self, value: TuningValue) -> Result<PenaltySpec> {
        match (&self.groups, value) {
            (None, TuningValue::Lasso(lambda)) => PenaltySpec::lasso(lambda),
            (Some(g), TuningValue::Group { lambda1, lambda2 }) => PenaltySpec::group(lambda1, lambda2, g.clone()),
            _ => Err(invalid("tuning value does not match the penalty family")),
        }
    }

    pub fn fit(&self, problem: &Problem<'_>, value: TuningValue, warm: Option<&ParameterVector>) -> Result<FitResult> {
        match (&self.groups, value) {
            (None, TuningValue::Lasso(lambda)) => match self.loss {
                LossKind::L2 => fit_l2(problem, lambda, &self.config, warm),
                LossKind::L1 => fit_l1(problem, lambda, &self.config, warm),
            },
            (Some(g), TuningValue::Group { lambda1, lambda2 }) => {
                fit_group(problem, lambda1, lambda2, g, &self.config, warm)
            }
            _ => Err(invalid("tuning value does not match the penalty family")),
        }
    }

    fn slices(&self) -> &'static [Slice] {
        if self.groups.is_some() {
            &Slice::GROUP_SLICES
        } else {
            &[Slice::Lasso]
        }
    }
}

/// Smallest lasso `lambda` at which `beta = 0` (with the intercept at its
/// unpenalized optimum) is stationary.
///
/// For l2 this is `max_k |sum_i (y_i - ybar) x_ik|`. For l1, with the
/// intercept at the median of `y`, it is the largest negated loss
/// directional derivative over the coefficient directions.
pub fn lambda_max(loss: LossKind, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    let problem = Problem::new(x, y)?;
    let n = problem.n() as f64;
    match loss {
        LossKind::L2 => {
            let ybar = y.iter().sum::<f64>() / n;
            Ok((0..x.p())
                .map(|k| x.column(k).iter().zip(y).map(|(v, yi)| v * (yi - ybar)).sum::<f64>().abs())
                .fold(0.0, f64::max))
        }
        LossKind::L1 => {
            let mut pts: Vec<WeightedPoint> = y.iter().map(|&v| WeightedPoint::new(v, 1.0)).collect();
            let mu = weighted_median(&mut pts)?;
            let theta = ParameterVector {
                mu,
                beta: vec![0.0; x.p()],
            };
            let state = ResidualState::from_scratch(x, y, &theta);
            let signs: Vec<_> = (0..state.len()).map(|i| state.sign(i)).collect();
            let mut best: f64 = 0.0;
            for k in 0..x.p() {
                let (mut fwd, mut bwd) = (0.0, 0.0);
                for (&s, &v) in signs.iter().zip(x.column(k)) {
                    fwd += l1_case(s, v, Direction::Forward);
                    bwd += l1_case(s, v, Direction::Backward);
                }
                best = best.max(-fwd).max(-bwd);
            }
            Ok(best)
        }
    }
}

/// Default start of the geometric search: twice the squared-error
/// threshold `max_k |Σ (y_i - ȳ) x_ik|`, raised to twice the loss's own
/// threshold if that is larger, or 1 when both are zero.
pub fn default_lambda0(loss: LossKind, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    let mut m = lambda_max(LossKind::L2, x, y)?;
    if loss != LossKind::L2 {
        m = m.max(lambda_max(loss, x, y)?);
    }
    Ok(if m > 0.0 { 2.0 * m } else { 1.0 })
}

/// Unpenalized refit on the columns in `active` plus the intercept; other
/// coefficients are 0 in the returned parameters. The objective reported is
/// the plain loss on the full design.
pub fn reestimate_active(
    loss: LossKind,
    x: &DesignMatrix,
    y: &[f64],
    active: &[usize],
    groups: Option<&GroupStructure>,
    config: &FitConfig,
) -> Result<FitResult> {
    let p = x.p();
    if let Some(&k) = active.iter().find(|&&k| k >= p) {
        return Err(invalid(alloc::format!("active index {k} out of range")));
    }
    if let Some(g) = groups {
        if g.p() != p {
            return Err(Error::DimensionMismatch {
                what: "group assignment",
                expected: p,
                found: g.p(),
            });
        }
    }
    let zero = PenaltySpec::Lasso { lambda: 0.0 };
    let mut theta = ParameterVector::zeros(p);
    let (converged, sweeps, updates) = if active.is_empty() {
        theta.mu = match loss {
            LossKind::L2 => y.iter().sum::<f64>() / y.len() as f64,
            LossKind::L1 => {
                let mut pts: Vec<WeightedPoint> = y.iter().map(|&v| WeightedPoint::new(v, 1.0)).collect();
                weighted_median(&mut pts)?
            }
        };
        (true, 0, 1)
    } else {
        let sub = x.select_columns(active)?;
        let problem = Problem::new(&sub, y)?;
        let mut cfg = config.clone();
        if loss == LossKind::L2 {
            cfg.tol_obj = config.tol_obj / 100.0;
        }
        cfg.trace = false;
        cfg.certify_descent = false;
        let fit = match (loss, groups) {
            (LossKind::L2, Some(g)) => fit_group(&problem, 0.0, 0.0, &g.restrict(active)?, &cfg, None)?,
            (LossKind::L2, None) => fit_l2(&problem, 0.0, &cfg, None)?,
            (LossKind::L1, None) => fit_l1(&problem, 0.0, &cfg, None)?,
            (LossKind::L1, Some(_)) => return Err(Error::GroupRequiresL2),
        };
        theta.mu = fit.theta.mu;
        for (&k, &b) in active.iter().zip(&fit.theta.beta) {
            theta.beta[k] = b;
        }
        (fit.converged, fit.sweeps, fit.updates)
    };
    let objective = objective(loss, x, y, &theta, &zero)?;
    Ok(FitResult {
        active_set: theta.active_set(),
        theta,
        converged,
        sweeps,
        updates,
        visits: updates,
        objective,
        trace: None,
        skipped_columns: Vec::new(),
        certificate_violations: 0,
    })
}

/// Training and held-out data of every fold, split once.
#[derive(Debug, Clone)]
pub struct CvData {
    folds: Vec<FoldData>,
}

#[derive(Debug, Clone)]
struct FoldData {
    x_train: DesignMatrix,
    y_train: Vec<f64>,
    x_test: DesignMatrix,
    y_test: Vec<f64>,
}

impl CvData {
    pub fn new(x: &DesignMatrix, y: &[f64], folds: &FoldAssignment) -> Result<Self> {
        if folds.n() != x.n() || y.len() != x.n() {
            return Err(Error::DimensionMismatch {
                what: "fold assignment",
                expected: x.n(),
                found: folds.n(),
            });
        }
        let folds = (0..folds.k)
            .map(|f| {
                let (train, test) = folds.split(f);
                Ok(FoldData {
                    x_train: x.select_rows(&train)?,
                    y_train: train.iter().map(|&i| y[i]).collect(),
                    x_test: x.select_rows(&test)?,
                    y_test: test.iter().map(|&i| y[i]).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { folds })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCurvePoint {
    pub lambda: TuningValue,
    pub cv_error: f64,
    pub mean_nonzero: f64,
    pub per_fold_errors: Vec<f64>,
    /// Folds whose penalized or re-estimated fit hit the sweep cap.
    pub unconverged_folds: usize,
}

/// Cross-validation error at `lambda`: fit on each fold complement,
/// optionally re-estimate the active set without penalty, and score the
/// held-out cases with the loss-matched metric. Returns the penalized fold
/// fits for warm starting later evaluations.
pub fn cv_error(
    solver: &Solver,
    data: &CvData,
    lambda: TuningValue,
    warm_starts: Option<&[ParameterVector]>,
    reestimate: bool,
) -> Result<(CvCurvePoint, Vec<ParameterVector>)> {
    if let Some(w) = warm_starts {
        if w.len() != data.k() {
            return Err(Error::DimensionMismatch {
                what: "warm starts",
                expected: data.k(),
                found: w.len(),
            });
        }
    }
    let mut per_fold_errors = Vec::with_capacity(data.k());
    let mut thetas = Vec::with_capacity(data.k());
    let mut nonzero = 0usize;
    let mut unconverged = 0;
    for (f, fold) in data.folds.iter().enumerate() {
        let problem = Problem::new(&fold.x_train, &fold.y_train)?;
        let fit = solver.fit(&problem, lambda, warm_starts.map(|w| &w[f]))?;
        let mut ok = fit.converged;
        nonzero += fit.active_set.len();
        let scored = if reestimate {
            let re = reestimate_active(
                solver.loss,
                &fold.x_train,
                &fold.y_train,
                &fit.active_set,
                solver.groups.as_ref(),
                &solver.config,
            )?;
            ok &= re.converged;
            re.theta
        } else {
            fit.theta.clone()
        };
        if !ok {
            unconverged += 1;
        }
        per_fold_errors.push(evaluate(solver.loss, &scored, &fold.x_test, &fold.y_test)?);
        thetas.push(fit.theta);
    }
    let cv_error = per_fold_errors.iter().sum::<f64>() / data.k() as f64;
    Ok((
        CvCurvePoint {
            lambda,
            cv_error,
            mean_nonzero: nonzero as f64 / data.k() as f64,
            per_fold_errors,
            unconverged_folds: unconverged,
        },
        thetas,
    ))
}

/// Memoized error curve along one slice, with warm starts flowing from
/// larger to smaller tuning constants.
pub struct CvCurve<'a> {
    solver: &'a Solver,
    data: &'a CvData,
    slice: Slice,
    reestimate: bool,
    warm_start: bool,
    memo: BTreeMap<u64, usize>,
    points: Vec<(f64, CvCurvePoint)>,
    fold_fits: Vec<(f64, Vec<ParameterVector>)>,
}

impl<'a> CvCurve<'a> {
    pub fn new(solver: &'a Solver, data: &'a CvData, slice: Slice, options: &TuneOptions) -> Self {
        Self {
            solver,
            data,
            slice,
            reestimate: options.reestimate,
            warm_start: options.warm_start,
            memo: BTreeMap::new(),
            points: Vec::new(),
            fold_fits: Vec::new(),
        }
    }

    pub fn eval(&mut self, s: f64) -> Result<f64> {
        Ok(self.point(s)?.cv_error)
    }

    pub fn point(&mut self, s: f64) -> Result<&CvCurvePoint> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(invalid("tuning constant must be finite and nonnegative"));
        }
        if let Some(&i) = self.memo.get(&s.to_bits()) {
            return Ok(&self.points[i].1);
        }
        let warm = if self.warm_start {
            self.fold_fits
                .iter()
                .filter(|(t, _)| *t > s)
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, w)| w.as_slice())
        } else {
            None
        };
        let (pt, fits) = cv_error(self.solver, self.data, self.slice.value(s), warm, self.reestimate)?;
        if self.warm_start {
            self.fold_fits.push((s, fits));
        }
        self.memo.insert(s.to_bits(), self.points.len());
        self.points.push((s, pt));
        Ok(&self.points[self.points.len() - 1].1)
    }

    /// Number of distinct evaluations so far.
    pub fn evaluations(&self) -> usize {
        self.points.len()
    }

    /// Evaluated points in evaluation order.
    pub fn points(&self) -> impl Iterator<Item = &CvCurvePoint> {
        self.points.iter().map(|(_, p)| p)
    }

    /// Evaluated `(s, point)` pairs sorted by decreasing `s`.
    pub fn sorted(&self) -> Vec<(f64, CvCurvePoint)> {
        let mut v = self.points.clone();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketFlag {
    /// `c(mid) <= c(high)` and `c(mid) < c(low)`.
    Found,
    /// The first step already increased the error; `high` is the best
    /// point seen and `low` was not evaluated.
    AtStart,
    /// The error kept falling down to the floor; `mid` is the last and
    /// best point and `low == mid`.
    HitFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub high: f64,
    pub mid: f64,
    pub low: f64,
    pub flag: BracketFlag,
    /// `(lambda, c)` in evaluation order.
    pub evaluated: Vec<(f64, f64)>,
}

impl Bracket {
    /// Interval handed to golden section search, or `None` when the
    /// minimum sits at the floor.
    pub fn interval(&self) -> Option<(f64, f64)> {
        match self.flag {
            BracketFlag::Found => Some((self.low, self.high)),
            BracketFlag::AtStart => Some((self.mid, self.high)),
            BracketFlag::HitFloor => None,
        }
    }

    /// Best evaluated point.
    pub fn best(&self) -> f64 {
        match self.flag {
            BracketFlag::AtStart => self.high,
            _ => self.mid,
        }
    }
}

/// Walks `lambda_k = r^k lambda0` downward until `c(lambda_{k+1}) >
/// c(lambda_k)` first occurs, returning `(lambda_{k-1}, lambda_k,
/// lambda_{k+1})`. Stops with [`BracketFlag::HitFloor`] once the next value
/// would fall below `floor`.
pub fn bracket<F>(mut cv: F, lambda0: f64, r: f64, floor: f64) -> Result<Bracket>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(invalid("lambda0 must be positive"));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid("reduction proportion must lie in (0, 1)"));
    }
    let mut evaluated = Vec::new();
    let c0 = cv(lambda0)?;
    evaluated.push((lambda0, c0));
    let l1 = lambda0 * r;
    let c1 = cv(l1)?;
    evaluated.push((l1, c1));
    if c1 > c0 {
        return Ok(Bracket {
            high: lambda0,
            mid: l1,
            low: l1 * r,
            flag: BracketFlag::AtStart,
            evaluated,
        });
    }
    let (mut prev, mut cur, mut c_cur) = (lambda0, l1, c1);
    loop {
        let next = cur * r;
        if next < floor || next == 0.0 {
            return Ok(Bracket {
                high: prev,
                mid: cur,
                low: cur,
                flag: BracketFlag::HitFloor,
                evaluated,
            });
        }
        let c_next = cv(next)?;
        evaluated.push((next, c_next));
        if c_next > c_cur {
            return Ok(Bracket {
                high: prev,
                mid: cur,
                low: next,
                flag: BracketFlag::Found,
                evaluated,
            });
        }
        (prev, cur, c_cur) = (cur, next, c_next);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenResult {
    pub lambda: f64,
    /// Interval width after each shrink step.
    pub widths: Vec<f64>,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_MAX_STEPS: usize = 200;

/// Golden section search for a minimum of `cv` on `[lo, hi]`, stopping
/// once the width falls below `tol_rel * hi`. Returns the midpoint of the
/// final interval.
pub fn golden_section<F>(mut cv: F, lo: f64, hi: f64, tol_rel: f64) -> Result<GoldenResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid("golden section needs lo < hi"));
    }
    let tol = (tol_rel.max(1e-12)) * hi.abs().max(f64::MIN_POSITIVE);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = cv(c)?;
    let mut fd = cv(d)?;
    let mut widths = Vec::new();
    while b - a >= tol && widths.len() < GOLDEN_MAX_STEPS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = cv(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = cv(d)?;
        }
        widths.push(b - a);
    }
    Ok(GoldenResult {
        lambda: 0.5 * (a + b),
        widths,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchSpec {
    /// Evaluate every value; the slice must fit the solver.
    Grid { values: Vec<f64>, slice: Slice },
    /// Geometric bracketing from `lambda0` (default from the data) with
    /// reduction `r`, then golden section to relative width `tol_rel`. For
    /// group solvers all three slices are searched and the best kept.
    BracketGolden {
        lambda0: Option<f64>,
        r: f64,
        tol_rel: f64,
    },
}

/// Default reduction proportion of the bracket walk.
pub const DEFAULT_REDUCTION: f64 = 0.8;
/// Default relative width at which golden section stops.
pub const DEFAULT_TOL_REL: f64 = 1e-2;

impl SearchSpec {
    pub fn bracket_default() -> Self {
        Self::BracketGolden {
            lambda0: None,
            r: DEFAULT_REDUCTION,
            tol_rel: DEFAULT_TOL_REL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    /// Score held-out folds with the unpenalized refit on the active set.
    pub reestimate: bool,
    pub warm_start: bool,
    /// The bracket walk stops below `floor_ratio * lambda0`.
    pub floor_ratio: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            reestimate: true,
            warm_start: true,
            floor_ratio: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub best: TuningValue,
    pub best_cv: f64,
    pub slice: Slice,
    pub bracket: Option<Bracket>,
    /// Every evaluated point, slices in search order, each by decreasing
    /// tuning constant.
    pub curve: Vec<CvCurvePoint>,
    /// Full-data penalized fit at `best`.
    pub penalized: FitResult,
    /// Unpenalized refit of the penalized fit's active set.
    pub refit: FitResult,
    /// Wall time of the full-data penalized fit.
    pub fit_seconds: f64,
}

struct SliceOutcome {
    best_s: f64,
    best_cv: f64,
    bracket: Option<Bracket>,
    curve: Vec<CvCurvePoint>,
}

fn search_slice(
    solver: &Solver,
    data: &CvData,
    slice: Slice,
    spec: &SearchSpec,
    lambda0: f64,
    options: &TuneOptions,
) -> Result<SliceOutcome> {
    let mut curve = CvCurve::new(solver, data, slice, options);
    let (best_s, bracket) = match spec {
        SearchSpec::Grid { values, .. } => {
            if values.is_empty() {
                return Err(Error::Empty("tuning grid"));
            }
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted.dedup();
            let mut best = (f64::INFINITY, sorted[0]);
            for &s in &sorted {
                let c = curve.eval(s)?;
                if c < best.0 {
                    best = (c, s);
                }
            }
            (best.1, None)
        }
        SearchSpec::BracketGolden { r, tol_rel, .. } => {
            // while the fold fits average under one predictor, an error above
            // the starting value counts as level so the walk goes on
            let mut baseline = None;
            let walk = |s: f64| -> Result<f64> {
                let pt = curve.point(s)?;
                let base = *baseline.get_or_insert(pt.cv_error);
                Ok(if pt.mean_nonzero < 1.0 { pt.cv_error.min(base) } else { pt.cv_error })
            };
            let br = bracket(walk, lambda0, *r, lambda0 * options.floor_ratio)?;
            let s = match br.interval() {
                Some((lo, hi)) => golden_section(|s| curve.eval(s), lo, hi, *tol_rel)?.lambda,
                None => br.best(),
            };
            // keep the golden point only if it does not lose to the bracket
            let c = curve.eval(s)?;
            let b = br.best();
            let s = if c <= curve.eval(b)? { s } else { b };
            (s, Some(br))
        }
    };
    let best_cv = curve.eval(best_s)?;
    Ok(SliceOutcome {
        best_s,
        best_cv,
        bracket,
        curve: curve.sorted().into_iter().map(|(_, p)| p).collect(),
    })
}

/// Source of wall-clock time in seconds.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Selects the tuning constant by cross-validation, then fits the full data
/// at the selected value and re-estimates its active set without penalty.
pub fn tune(
    solver: &Solver,
    x: &DesignMatrix,
    y: &[f64],
    search: &SearchSpec,
    folds: &FoldAssignment,
    options: &TuneOptions,
) -> Result<TuningResult> {
    tune_timed(solver, x, y, search, folds, options, &NoClock)
}

/// [`tune`], timing the final full-data fit with `clock`.
pub fn tune_timed(
    solver: &Solver,
    x: &DesignMatrix,
    y: &[f64],
    search: &SearchSpec,
    folds: &FoldAssignment,
    options: &TuneOptions,
    clock: &dyn Clock,
) -> Result<TuningResult> {
    let data = CvData::new(x, y, folds)?;
    let slices: Vec<Slice> = match search {
        SearchSpec::Grid { slice, .. } => {
            if !solver.slices().contains(slice) {
                return Err(invalid("grid slice does not match the penalty family"));
            }
            vec![*slice]
        }
        SearchSpec::BracketGolden { .. } => solver.slices().to_vec(),
    };
    let lambda0 = match search {
        SearchSpec::BracketGolden { lambda0: Some(l), .. } => *l,
        _ => default_lambda0(solver.loss, x, y)?,
    };
    let mut curve = Vec::new();
    let mut best: Option<(SliceOutcome, Slice)> = None;
    for slice in slices {
        let mut out = search_slice(solver, &data, slice, search, lambda0, options)?;
        curve.append(&mut out.curve);
        if best.as_ref().is_none_or(|(b, _)| out.best_cv < b.best_cv) {
            best = Some((out, slice));
        }
    }
    let (out, slice) = best.expect("at least one slice");
    let value = slice.value(out.best_s);
    let problem = Problem::new(x, y)?;
    let start = clock.seconds();
    let penalized = solver.fit(&problem, value, None)?;
    let fit_seconds = clock.seconds() - start;
    let refit = reestimate_active(solver.loss, x, y, &penalized.active_set, solver.groups.as_ref(), &solver.config)?;
    Ok(TuningResult {
        best: value,
        best_cv: out.best_cv,
        slice,
        bracket: out.bracket,
        curve,
        penalized,
        refit,
        fit_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l2::Strategy;
    use rand::Rng;

    #[test]
    fn balanced_folds() {
        assert_eq!(kfold_split(10, 5, 1).unwrap().fold_sizes(), vec![2; 5]);
        let mut s = kfold_split(11, 5, 1).unwrap().fold_sizes();
        s.sort();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
        assert_eq!(kfold_split(30, 4, 9), kfold_split(30, 4, 9));
        assert!(kfold_split(5, 1, 0).is_err());
        assert!(kfold_split(5, 6, 0).is_err());
    }

    #[test]
    fn bracket_on_parabola() {
        let br = bracket(|l| Ok((l - 2.0) * (l - 2.0)), 16.0, 0.5, 1e-6).unwrap();
        assert_eq!((br.high, br.mid, br.low), (4.0, 2.0, 1.0));
        assert_eq!(br.flag, BracketFlag::Found);
        let lams: Vec<f64> = br.evaluated.iter().map(|e| e.0).collect();
        assert_eq!(lams, vec![16.0, 8.0, 4.0, 2.0, 1.0]);
    }

    #[test]
    fn bracket_edges() {
        let br = bracket(|l| Ok(-l), 8.0, 0.5, 1e-6).unwrap();
        assert_eq!(br.flag, BracketFlag::AtStart);
        assert_eq!((br.high, br.mid, br.low), (8.0, 4.0, 2.0));
        let br = bracket(|l| Ok(l), 8.0, 0.5, 1.0).unwrap();
        assert_eq!(br.flag, BracketFlag::HitFloor);
        assert_eq!(br.mid, 1.0);
    }

    #[test]
    fn golden_on_parabola_and_flat() {
        let g = golden_section(|l| Ok((l - 2.0) * (l - 2.0)), 1.0, 4.0, 1e-3).unwrap();
        assert!((g.lambda - 2.0).abs() <= 0.004);
        let mut w = 3.0;
        for (j, width) in g.widths.iter().enumerate() {
            w *= INV_PHI;
            assert!((width / 3.0 - libm::pow(INV_PHI, (j + 1) as f64)).abs() < 1e-9);
            assert!((width - w).abs() < 1e-9);
        }
        let g = golden_section(|_| Ok(1.0), 1.0, 4.0, 1e-2).unwrap();
        assert!(g.lambda >= 1.0 && g.lambda <= 4.0);
    }

    fn sim(seed: u64, n: usize, p: usize) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.7..1.7)).collect()).collect();
        let y = (0..n).map(|i| rows[i][0] + rows[i][1] + rng.random_range(-1.0..1.0)).collect();
        (DesignMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn all_zero_lambda_gives_baseline() {
        let (x, y) = sim(2, 40, 5);
        let folds = kfold_split(40, 4, 3).unwrap();
        let data = CvData::new(&x, &y, &folds).unwrap();
        for loss in [LossKind::L1, LossKind::L2] {
            let solver = Solver::lasso(loss, FitConfig::default());
            let (pt, _) = cv_error(&solver, &data, TuningValue::Lasso(1e6), None, true).unwrap();
            let mut expected = 0.0;
            for f in 0..4 {
                let (train, test) = folds.split(f);
                let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let re = reestimate_active(loss, &x.select_rows(&train).unwrap(), &ytr, &[], None, &FitConfig::default())
                    .unwrap();
                let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
                expected += evaluate(loss, &re.theta, &x.select_rows(&test).unwrap(), &yte).unwrap();
            }
            assert!((pt.cv_error - expected / 4.0).abs() < 1e-12);
            assert_eq!(pt.mean_nonzero, 0.0);
        }
    }

    #[test]
    fn symmetric_duplicated_data_gives_equal_fold_errors() {
        let (x0, y0) = sim(5, 12, 3);
        let rows: Vec<Vec<f64>> = (0..24).map(|i| (0..3).map(|j| x0.get(i % 12, j)).collect()).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..24).map(|i| y0[i % 12]).collect();
        let folds = FoldAssignment {
            k: 2,
            assignment: (0..24).map(|i| i / 12).collect(),
            seed: 0,
        };
        let data = CvData::new(&x, &y, &folds).unwrap();
        let solver = Solver::lasso(LossKind::L2, FitConfig::default());
        let (pt, _) = cv_error(&solver, &data, TuningValue::Lasso(0.5), None, true).unwrap();
        assert!((pt.per_fold_errors[0] - pt.per_fold_errors[1]).abs() < 1e-10);
        assert_eq!(pt.cv_error, (pt.per_fold_errors[0] + pt.per_fold_errors[1]) / 2.0);
    }

    #[test]
    fn memoized_curve_does_not_refit() {
        let (x, y) = sim(7, 30, 4);
        let folds = kfold_split(30, 3, 1).unwrap();
        let data = CvData::new(&x, &y, &folds).unwrap();
        let solver = Solver::lasso(LossKind::L2, FitConfig::default());
        let mut curve = CvCurve::new(&solver, &data, Slice::Lasso, &TuneOptions::default());
        let a = curve.eval(0.7).unwrap();
        let b = curve.eval(0.7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(curve.evaluations(), 1);
    }

    #[test]
    fn reestimate_matches_normal_equations() {
        let (x, y) = sim(11, 25, 5);
        let re = reestimate_active(LossKind::L2, &x, &y, &[0, 2], None, &FitConfig::default()).unwrap();
        // 3x3 normal equations for (mu, b0, b2)
        let cols = [vec![1.0; 25], x.column(0).to_vec(), x.column(2).to_vec()];
        let mut a = [[0.0; 4]; 3];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] = cols[r].iter().zip(&cols[c]).map(|(u, v)| u * v).sum();
            }
            a[r][3] = cols[r].iter().zip(&y).map(|(u, v)| u * v).sum();
        }
        for i in 0..3 {
            for r in 0..3 {
                if r != i {
                    let f = a[r][i] / a[i][i];
                    for c in 0..4 {
                        a[r][c] -= f * a[i][c];
                    }
                }
            }
        }
        let sol: Vec<f64> = (0..3).map(|i| a[i][3] / a[i][i]).collect();
        assert!((re.theta.mu - sol[0]).abs() < 1e-6);
        assert!((re.theta.beta[0] - sol[1]).abs() < 1e-6);
        assert!((re.theta.beta[2] - sol[2]).abs() < 1e-6);
        assert_eq!(re.theta.beta[1], 0.0);
    }

    #[test]
    fn tune_finds_signal_with_either_search() {
        let (x, y) = sim(13, 60, 8);
        let folds = kfold_split(60, 5, 2).unwrap();
        for strategy in [Strategy::Cyclic, Strategy::Greedy] {
            let solver = Solver::lasso(LossKind::L2, FitConfig::default().with_strategy(strategy));
            let res = tune(&solver, &x, &y, &SearchSpec::bracket_default(), &folds, &TuneOptions::default()).unwrap();
            assert!(res.refit.active_set.contains(&0) && res.refit.active_set.contains(&1));
            let br = res.bracket.as_ref().unwrap();
            if br.flag == BracketFlag::Found {
                let c = |l: f64| res.curve.iter().find(|p| p.lambda == TuningValue::Lasso(l)).unwrap().cv_error;
                assert!(c(br.mid) <= c(br.high) && c(br.mid) <= c(br.low));
            }
        }
    }

    #[test]
    fn group_search_reports_slice_values() {
        let (x, y) = sim(17, 40, 6);
        let folds = kfold_split(40, 4, 2).unwrap();
        let solver = Solver::group(GroupStructure::contiguous(6, 2).unwrap(), FitConfig::default());
        let res = tune(&solver, &x, &y, &SearchSpec::bracket_default(), &folds, &TuneOptions::default()).unwrap();
        match (res.slice, res.best) {
            (Slice::GroupOnly, TuningValue::Group { lambda1, .. }) => assert_eq!(lambda1, 0.0),
            (Slice::LassoOnly, TuningValue::Group { lambda2, .. }) => assert_eq!(lambda2, 0.0),
            (Slice::Equal, TuningValue::Group { lambda1, lambda2 }) => assert_eq!(lambda1, lambda2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
