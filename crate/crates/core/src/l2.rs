//! Lasso-penalized least squares by cyclic or greedy coordinate descent.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::model::{
    check_tuning, tol_kkt, Coord, Direction, FitResult, LossKind, ParameterVector, PenaltySpec,
    Problem,
};
use crate::objective::{column_bound_b, lasso_dir, objective_from_residuals, steepest_descent_score};
use crate::residual::{ResidualState, RECOMPUTE_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Cyclic,
    Greedy,
}

/// Solver settings shared by the l2, l1 and group solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_sweeps: usize,
    /// Relative objective change below which a sweep counts as stalled.
    pub tol_obj: f64,
    pub strategy: Strategy,
    /// Record the objective after every sweep (cyclic) or step (greedy).
    pub trace: bool,
    /// Check every greedy step against the `d^2 / (2b)` decrease bound.
    pub certify_descent: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            tol_obj: 1e-8,
            strategy: Strategy::Cyclic,
            trace: false,
            certify_descent: false,
        }
    }
}

impl FitConfig {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps must be at least 1"));
        }
        if !(self.tol_obj > 0.0) || !self.tol_obj.is_finite() {
            return Err(invalid("tol_obj must be positive"));
        }
        Ok(())
    }
}

pub type L2FitConfig = FitConfig;

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn rel_change(old: f64, new: f64) -> f64 {
    (old - new).abs() / old.abs().max(f64::MIN_POSITIVE)
}

/// Sets the intercept to the mean of `y - X beta`.
pub fn update_mu_l2(problem: &Problem<'_>, state: &mut ResidualState, theta: &mut ParameterVector) -> f64 {
    let old = theta.mu;
    let new = old + state.sum() / problem.n() as f64;
    state.apply_update(problem.x(), Coord::Intercept, old, new);
    theta.mu = new;
    new
}

/// Exact minimizer along `beta_k` of
/// `g + lambda |beta_k| + (ridge_aug / 2) beta_k^2`.
///
/// `ridge_aug` is zero for the plain lasso; the group solver uses it to
/// carry the quadratic majorizer of the group norm.
pub fn update_beta_k_l2(
    problem: &Problem<'_>,
    state: &mut ResidualState,
    theta: &mut ParameterVector,
    k: usize,
    lambda: f64,
    ridge_aug: f64,
) -> Result<f64> {
    let s = problem.col_sq(k);
    if s == 0.0 {
        return Err(Error::ZeroVarianceColumn(k));
    }
    let old = theta.beta[k];
    let c = state.dot(problem.x().column(k)) + s * old;
    let new = soft_threshold(c, lambda) / (s + ridge_aug);
    state.apply_update(problem.x(), Coord::Beta(k), old, new);
    theta.beta[k] = new;
    Ok(new)
}

/// Initial point and the list of identically zero columns, whose
/// coefficients are pinned at zero.
pub(crate) fn start_point(
    problem: &Problem<'_>,
    warm_start: Option<&ParameterVector>,
) -> Result<(ParameterVector, Vec<usize>)> {
    let mut theta = match warm_start {
        Some(w) => {
            problem.check_theta(w)?;
            w.clone()
        }
        None => ParameterVector::zeros(problem.p()),
    };
    let skipped: Vec<usize> = (0..problem.p()).filter(|&k| problem.col_sq(k) == 0.0).collect();
    for &k in &skipped {
        theta.beta[k] = 0.0;
    }
    Ok((theta, skipped))
}

pub(crate) fn finish(
    loss: LossKind,
    problem: &Problem<'_>,
    penalty: &PenaltySpec,
    theta: ParameterVector,
    state: &mut ResidualState,
    converged: bool,
    sweeps: usize,
    updates: usize,
    trace: Option<Vec<f64>>,
    skipped_columns: Vec<usize>,
    certificate_violations: usize,
) -> FitResult {
    state.recompute(problem.x(), problem.y(), &theta);
    let objective = objective_from_residuals(loss, state, &theta, penalty);
    FitResult {
        active_set: theta.active_set(),
        theta,
        converged,
        sweeps,
        updates,
        visits: updates,
        objective,
        trace,
        skipped_columns,
        certificate_violations,
    }
}

/// Fits lasso-penalized least squares at `lambda`.
///
/// Cyclic sweeps update the intercept and then every coefficient in index
/// order, skipping a coefficient when neither coordinate direction descends.
/// Greedy steps update the coordinate with the most negative directional
/// derivative. Either way, a fit converges once the relative objective
/// change stalls below `tol_obj` and every coordinate directional
/// derivative is at least `-tol_kkt(lambda)`.
pub fn fit_l2(
    problem: &Problem<'_>,
    lambda: f64,
    config: &FitConfig,
    warm_start: Option<&ParameterVector>,
) -> Result<FitResult> {
    check_tuning(lambda, "lambda")?;
    config.validate()?;
    let (theta, skipped) = start_point(problem, warm_start)?;
    match config.strategy {
        Strategy::Cyclic => Ok(cyclic(problem, lambda, config, theta, skipped)),
        Strategy::Greedy => Ok(greedy(problem, lambda, config, theta, skipped)),
    }
}

fn cyclic(
    problem: &Problem<'_>,
    lambda: f64,
    config: &FitConfig,
    mut theta: ParameterVector,
    skipped: Vec<usize>,
) -> FitResult {
    let x = problem.x();
    let y = problem.y();
    let penalty = PenaltySpec::Lasso { lambda };
    let tol = tol_kkt(lambda);
    let mut state = ResidualState::from_scratch(x, y, &theta);
    let mut f = objective_from_residuals(LossKind::L2, &state, &theta, &penalty);
    let mut trace = config.trace.then(|| vec![f]);
    let mut updates = 0;
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        update_mu_l2(problem, &mut state, &mut theta);
        updates += 1;
        for k in 0..problem.p() {
            if problem.col_sq(k) == 0.0 {
                continue;
            }
            let c = state.dot(x.column(k));
            let b = theta.beta[k];
            let fwd = -c + lasso_dir(lambda, b, Direction::Forward);
            let bwd = c + lasso_dir(lambda, b, Direction::Backward);
            debug_assert!(fwd >= -1e-9 * (1.0 + c.abs()) || bwd >= -1e-9 * (1.0 + c.abs()));
            if fwd >= 0.0 && bwd >= 0.0 {
                continue;
            }
            // the column is nonzero, so the update cannot fail
            let _ = update_beta_k_l2(problem, &mut state, &mut theta, k, lambda, 0.0);
            updates += 1;
        }
        state.end_sweep(x, y, &theta);
        let f_new = objective_from_residuals(LossKind::L2, &state, &theta, &penalty);
        if let Some(t) = trace.as_mut() {
            t.push(f_new);
        }
        let stalled = rel_change(f, f_new) < config.tol_obj;
        f = f_new;
        if stalled {
            state.recompute(x, y, &theta);
            let st = steepest_descent_score(LossKind::L2, x, &state, &theta, &penalty);
            if st.h >= -tol {
                converged = true;
                break;
            }
        }
    }
    let usable = 1 + problem.p() - skipped.len();
    let mut fit = finish(
        LossKind::L2,
        problem,
        &penalty,
        theta,
        &mut state,
        converged,
        sweeps,
        updates,
        trace,
        skipped,
        0,
    );
    fit.visits = sweeps * usable;
    fit
}

/// Gradient sums `sum_i r_i x_it` for every coordinate (slot 0 is the
/// intercept), kept current through cached Gram columns.
struct GradientCache {
    grad: Vec<f64>,
    gram: Vec<Option<Vec<f64>>>,
}

impl GradientCache {
    fn new(problem: &Problem<'_>, state: &ResidualState) -> Self {
        let mut cache = Self {
            grad: vec![0.0; problem.p() + 1],
            gram: vec![None; problem.p() + 1],
        };
        cache.refresh(problem, state);
        cache
    }

    fn refresh(&mut self, problem: &Problem<'_>, state: &ResidualState) {
        self.grad[0] = state.sum();
        for k in 0..problem.p() {
            self.grad[k + 1] = state.dot(problem.x().column(k));
        }
    }

    fn gram_column(problem: &Problem<'_>, slot: usize) -> Vec<f64> {
        let x = problem.x();
        let mut col = Vec::with_capacity(problem.p() + 1);
        if slot == 0 {
            col.push(problem.n() as f64);
            col.extend((0..problem.p()).map(|t| x.column(t).iter().sum::<f64>()));
        } else {
            let xj = x.column(slot - 1);
            col.push(xj.iter().sum());
            col.extend(
                (0..problem.p()).map(|t| xj.iter().zip(x.column(t)).map(|(a, b)| a * b).sum::<f64>()),
            );
        }
        col
    }

    /// Residuals moved by `-x_slot * delta`.
    fn shift(&mut self, problem: &Problem<'_>, slot: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let gram = self.gram[slot].get_or_insert_with(|| Self::gram_column(problem, slot));
        for (g, c) in self.grad.iter_mut().zip(gram.iter()) {
            *g -= delta * c;
        }
    }

    /// Most negative directional derivative, lowest slot and forward first
    /// on ties.
    fn steepest(&self, problem: &Problem<'_>, theta: &ParameterVector, lambda: f64) -> (f64, usize, Direction) {
        let mut best = (-self.grad[0], 0, Direction::Forward);
        if self.grad[0] < best.0 {
            best = (self.grad[0], 0, Direction::Backward);
        }
        for k in 0..problem.p() {
            if problem.col_sq(k) == 0.0 {
                continue;
            }
            let g = self.grad[k + 1];
            let b = theta.beta[k];
            let fwd = -g + lasso_dir(lambda, b, Direction::Forward);
            if fwd < best.0 {
                best = (fwd, k + 1, Direction::Forward);
            }
            let bwd = g + lasso_dir(lambda, b, Direction::Backward);
            if bwd < best.0 {
                best = (bwd, k + 1, Direction::Backward);
            }
        }
        best
    }
}

fn greedy(
    problem: &Problem<'_>,
    lambda: f64,
    config: &FitConfig,
    mut theta: ParameterVector,
    skipped: Vec<usize>,
) -> FitResult {
    let x = problem.x();
    let y = problem.y();
    let p = problem.p();
    let penalty = PenaltySpec::Lasso { lambda };
    let tol = tol_kkt(lambda);
    let bound = column_bound_b(x);
    let window = p + 1;
    let max_steps = config.max_sweeps.saturating_mul(window);
    let refresh_every = RECOMPUTE_PERIOD.saturating_mul(window);

    let mut state = ResidualState::from_scratch(x, y, &theta);
    let mut cache = GradientCache::new(problem, &state);
    let mut f = objective_from_residuals(LossKind::L2, &state, &theta, &penalty);
    let mut trace = config.trace.then(|| vec![f]);
    // objective values of the last `window` steps, oldest first
    let mut history: Vec<f64> = Vec::with_capacity(window + 1);
    history.push(f);
    let mut steps = 0usize;
    let mut violations = 0;
    let mut converged = false;

    loop {
        let (mut h, mut slot, _) = cache.steepest(problem, &theta, lambda);
        if h >= -tol {
            state.recompute(x, y, &theta);
            cache.refresh(problem, &state);
            let fresh = cache.steepest(problem, &theta, lambda);
            h = fresh.0;
            slot = fresh.1;
            let stalled = history.len() > window && rel_change(history[0], f) < config.tol_obj;
            if h >= -tol && (h >= 0.0 || stalled) {
                converged = true;
                break;
            }
        }
        if steps >= max_steps {
            break;
        }
        let which = if slot == 0 { Coord::Intercept } else { Coord::Beta(slot - 1) };
        let old = theta.get(which);
        let new = match which {
            Coord::Intercept => update_mu_l2(problem, &mut state, &mut theta),
            Coord::Beta(k) => update_beta_k_l2(problem, &mut state, &mut theta, k, lambda, 0.0)
                .expect("zero columns are never selected"),
        };
        cache.shift(problem, slot, new - old);
        steps += 1;

        let f_new = objective_from_residuals(LossKind::L2, &state, &theta, &penalty);
        if config.certify_descent && f - f_new < h * h / (2.0 * bound) - 1e-10 {
            violations += 1;
        }
        f = f_new;
        if let Some(t) = trace.as_mut() {
            t.push(f);
        }
        history.push(f);
        if history.len() > window + 1 {
            history.remove(0);
        }
        if steps % refresh_every == 0 {
            state.recompute(x, y, &theta);
            cache.refresh(problem, &state);
        }
    }
    let sweeps = steps.div_ceil(window);
    finish(
        LossKind::L2,
        problem,
        &penalty,
        theta,
        &mut state,
        converged,
        sweeps,
        steps,
        trace,
        skipped,
        violations,
    )
}
