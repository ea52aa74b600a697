//! Lasso-penalized least absolute deviation regression by Edgeworth's
//! algorithm: every coordinate update is a weighted median.
//!
//! The penalty `lambda |beta_k|` is treated as one more absolute residual
//! with response 0 and design entry `lambda`, so the `beta_k` update is the
//! weighted median of the case points `(r_i / x_ik + beta_k, |x_ik|)` plus
//! the pseudo-point `(0, lambda)`.
//!
//! The greedy solver keeps a table of coordinate directional derivatives of
//! the loss. A case only changes its contribution when its residual changes
//! sign or hits zero, so after an update only the cases touched by the
//! updated column are reclassified, and each reclassification adjusts the
//! table by entries of one design row.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::l2::{finish, rel_change, start_point, FitConfig, Strategy};
use crate::model::{check_tuning, tol_kkt, Coord, DesignMatrix, Direction, FitResult, LossKind, ParameterVector, PenaltySpec, Problem};
use crate::objective::{l1_case, lasso_dir, loss_dir, objective_from_residuals, steepest_descent_score};
use crate::residual::{ResidualSign, ResidualState, RECOMPUTE_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub z: f64,
    pub w: f64,
}

impl WeightedPoint {
    pub fn new(z: f64, w: f64) -> Self {
        Self { z, w }
    }
}

/// Minimizer of `sum_i w_i |z_i - beta|`: the order statistic `z_[i]` at
/// which the cumulative weight first reaches half the total. Equal `z`
/// values are merged before the scan. Reorders `points`.
pub fn weighted_median(points: &mut [WeightedPoint]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("weighted median of no points"));
    }
    if points.iter().any(|p| !p.z.is_finite() || !(p.w > 0.0) || !p.w.is_finite()) {
        return Err(invalid("weighted median needs finite locations and positive weights"));
    }
    points.sort_unstable_by(|a, b| a.z.total_cmp(&b.z));
    let total: f64 = points.iter().map(|p| p.w).sum();
    let half = 0.5 * total;
    let mut cum = 0.0;
    let mut i = 0;
    while i < points.len() {
        let z = points[i].z;
        while i < points.len() && points[i].z == z {
            cum += points[i].w;
            i += 1;
        }
        if cum >= half {
            return Ok(z);
        }
    }
    // cum == total after the last run
    Ok(points[points.len() - 1].z)
}

/// Sets the intercept to the median of `y - X beta`.
pub fn update_mu_l1(problem: &Problem<'_>, state: &mut ResidualState, theta: &mut ParameterVector) -> f64 {
    let mut scratch = Vec::with_capacity(problem.n());
    mu_step(problem, state, theta, &mut scratch)
}

/// Weighted-median update of `beta_k`. Cases with `x_ik = 0` are left out;
/// when `lambda > 0` the pseudo-point `(0, lambda)` joins the points.
pub fn update_beta_k_l1(
    problem: &Problem<'_>,
    state: &mut ResidualState,
    theta: &mut ParameterVector,
    k: usize,
    lambda: f64,
) -> Result<f64> {
    let mut scratch = Vec::with_capacity(problem.n() + 1);
    beta_step(problem, state, theta, k, lambda, &mut scratch)
}

fn mu_step(
    problem: &Problem<'_>,
    state: &mut ResidualState,
    theta: &mut ParameterVector,
    scratch: &mut Vec<WeightedPoint>,
) -> f64 {
    let old = theta.mu;
    scratch.clear();
    scratch.extend(state.residuals().iter().map(|r| WeightedPoint::new(r + old, 1.0)));
    let new = weighted_median(scratch).expect("n >= 1 unit-weight points");
    state.apply_update(problem.x(), Coord::Intercept, old, new);
    theta.mu = new;
    new
}

fn beta_step(
    problem: &Problem<'_>,
    state: &mut ResidualState,
    theta: &mut ParameterVector,
    k: usize,
    lambda: f64,
    scratch: &mut Vec<WeightedPoint>,
) -> Result<f64> {
    let old = theta.beta[k];
    scratch.clear();
    for (&r, &v) in state.residuals().iter().zip(problem.x().column(k)) {
        if v != 0.0 {
            scratch.push(WeightedPoint::new(r / v + old, v.abs()));
        }
    }
    if lambda > 0.0 {
        scratch.push(WeightedPoint::new(0.0, lambda));
    }
    if scratch.is_empty() {
        return Err(Error::ZeroVarianceColumn(k));
    }
    let new = weighted_median(scratch)?;
    state.apply_update(problem.x(), Coord::Beta(k), old, new);
    theta.beta[k] = new;
    Ok(new)
}

/// Coordinate directional derivatives of the l1 loss, slot 0 for the
/// intercept and slot `k + 1` for `beta_k`, with the residual sign class
/// of every case. Keeps a row-major copy of the design so a case's
/// reclassification touches contiguous memory.
#[derive(Debug, Clone, PartialEq)]
pub struct L1DerivativeTable {
    g_forward: Vec<f64>,
    g_backward: Vec<f64>,
    signs: Vec<ResidualSign>,
    rows: Vec<f64>,
    p: usize,
}

/// Per-case contribution to the forward and backward derivatives as
/// `(lin_f, abs_f, lin_b, abs_b)`, meaning `lin * v + abs * |v|`.
#[inline]
fn case_coeffs(s: ResidualSign) -> (f64, f64, f64, f64) {
    match s {
        ResidualSign::Positive => (-1.0, 0.0, 1.0, 0.0),
        ResidualSign::Negative => (1.0, 0.0, -1.0, 0.0),
        ResidualSign::Zero => (0.0, 1.0, 0.0, 1.0),
    }
}

impl L1DerivativeTable {
    pub fn build(x: &DesignMatrix, state: &ResidualState) -> Self {
        let (n, p) = (x.n(), x.p());
        let mut rows = vec![0.0; n * p];
        for k in 0..p {
            for (i, &v) in x.column(k).iter().enumerate() {
                rows[i * p + k] = v;
            }
        }
        let mut table = Self {
            g_forward: vec![0.0; p + 1],
            g_backward: vec![0.0; p + 1],
            signs: Vec::with_capacity(n),
            rows,
            p,
        };
        table.rebuild(x, state);
        table
    }

    /// Recomputes every entry from `state`.
    pub fn rebuild(&mut self, x: &DesignMatrix, state: &ResidualState) {
        self.signs.clear();
        self.signs.extend((0..state.len()).map(|i| state.sign(i)));
        let (mut f0, mut b0) = (0.0, 0.0);
        for &s in &self.signs {
            f0 += l1_case(s, 1.0, Direction::Forward);
            b0 += l1_case(s, 1.0, Direction::Backward);
        }
        self.g_forward[0] = f0;
        self.g_backward[0] = b0;
        for k in 0..x.p() {
            let mut f = 0.0;
            let mut b = 0.0;
            for (&s, &v) in self.signs.iter().zip(x.column(k)) {
                f += l1_case(s, v, Direction::Forward);
                b += l1_case(s, v, Direction::Backward);
            }
            self.g_forward[k + 1] = f;
            self.g_backward[k + 1] = b;
        }
    }

    /// Objective directional derivative for a coordinate under a lasso
    /// penalty.
    pub fn derivative(&self, which: Coord, dir: Direction, theta: &ParameterVector, lambda: f64) -> f64 {
        match which {
            Coord::Intercept => self.loss_derivative(0, dir),
            Coord::Beta(k) => self.loss_derivative(k + 1, dir) + lasso_dir(lambda, theta.beta[k], dir),
        }
    }

    /// Forward derivatives of the objective for every slot.
    pub fn forward(&self, theta: &ParameterVector, lambda: f64) -> Vec<f64> {
        self.all(Direction::Forward, theta, lambda)
    }

    pub fn backward(&self, theta: &ParameterVector, lambda: f64) -> Vec<f64> {
        self.all(Direction::Backward, theta, lambda)
    }

    fn all(&self, dir: Direction, theta: &ParameterVector, lambda: f64) -> Vec<f64> {
        core::iter::once(Coord::Intercept)
            .chain((0..theta.beta.len()).map(Coord::Beta))
            .map(|c| self.derivative(c, dir, theta, lambda))
            .collect()
    }

    #[inline]
    fn loss_derivative(&self, slot: usize, dir: Direction) -> f64 {
        match dir {
            Direction::Forward => self.g_forward[slot],
            Direction::Backward => self.g_backward[slot],
        }
    }

    /// Reclassifies the cases touched by an update of `which` and adjusts
    /// the table for every case whose sign class changed. Returns the
    /// number of changed cases.
    pub fn update_after(&mut self, x: &DesignMatrix, state: &ResidualState, which: Coord) -> usize {
        let mut changed = 0;
        for i in 0..state.len() {
            if let Coord::Beta(k) = which {
                if x.get(i, k) == 0.0 {
                    continue;
                }
            }
            let new = state.sign(i);
            let old = self.signs[i];
            if new != old {
                self.move_case(i, old, new);
                changed += 1;
            }
        }
        changed
    }

    fn move_case(&mut self, i: usize, old: ResidualSign, new: ResidualSign) {
        self.signs[i] = new;
        let (nf, naf, nb, nab) = case_coeffs(new);
        let (of, oaf, ob, oab) = case_coeffs(old);
        let (lf, af, lb, ab) = (nf - of, naf - oaf, nb - ob, nab - oab);
        self.g_forward[0] += lf + af;
        self.g_backward[0] += lb + ab;
        let row = &self.rows[i * self.p..(i + 1) * self.p];
        for ((gf, gb), &v) in self.g_forward[1..].iter_mut().zip(&mut self.g_backward[1..]).zip(row) {
            let a = v.abs();
            *gf += lf * v + af * a;
            *gb += lb * v + ab * a;
        }
    }

    /// Most negative objective derivative; lowest slot, forward first on
    /// ties. Columns in `frozen` are never selected.
    fn steepest(&self, theta: &ParameterVector, lambda: f64, frozen: &[bool]) -> (f64, Coord) {
        let mut best = (f64::INFINITY, Coord::Intercept);
        let slots = core::iter::once(Coord::Intercept).chain((0..theta.beta.len()).map(Coord::Beta));
        for which in slots {
            if let Coord::Beta(k) = which {
                if frozen[k] {
                    continue;
                }
            }
            for dir in [Direction::Forward, Direction::Backward] {
                let d = self.derivative(which, dir, theta, lambda);
                if d < best.0 {
                    best = (d, which);
                }
            }
        }
        best
    }
}

/// Fits lasso-penalized least absolute deviation regression at `lambda`.
///
/// The fit stops when every coordinate directional derivative is at least
/// `-tol_kkt(lambda)`, or when the relative objective decrease over a sweep
/// (cyclic) or over `p + 1` steps (greedy) falls below `tol_obj`. It is
/// flagged converged only in the first case, checked from scratch. Even a
/// converged point need not be a minimum: Edgeworth's algorithm can stall
/// at an inferior point where no single coordinate move helps.
pub fn fit_l1(
    problem: &Problem<'_>,
    lambda: f64,
    config: &FitConfig,
    warm_start: Option<&ParameterVector>,
) -> Result<FitResult> {
    check_tuning(lambda, "lambda")?;
    config.validate()?;
    let (theta, skipped) = start_point(problem, warm_start)?;
    // a zero column can only move through the pseudo-point, which pins it at 0
    let mut frozen = vec![false; problem.p()];
    for &k in &skipped {
        frozen[k] = true;
    }
    match config.strategy {
        Strategy::Greedy => Ok(greedy(problem, lambda, config, theta, skipped, &frozen)),
        Strategy::Cyclic => Ok(cyclic(problem, lambda, config, theta, skipped, &frozen)),
    }
}

fn greedy(
    problem: &Problem<'_>,
    lambda: f64,
    config: &FitConfig,
    mut theta: ParameterVector,
    skipped: Vec<usize>,
    frozen: &[bool],
) -> FitResult {
    let x = problem.x();
    let y = problem.y();
    let p = problem.p();
    let penalty = PenaltySpec::Lasso { lambda };
    let tol = tol_kkt(lambda);
    let window = p + 1;
    let max_steps = config.max_sweeps.saturating_mul(window);
    let refresh_every = RECOMPUTE_PERIOD.saturating_mul(window);

    let mut state = ResidualState::from_scratch(x, y, &theta);
    let mut table = L1DerivativeTable::build(x, &state);
    let mut scratch = Vec::with_capacity(problem.n() + 1);
    let mut f = objective_from_residuals(LossKind::L1, &state, &theta, &penalty);
    let mut trace = config.trace.then(|| vec![f]);
    let mut steps = 0usize;
    let mut converged = false;
    let mut idle = 0;
    let mut f_window = f;

    loop {
        let (mut h, mut which) = table.steepest(&theta, lambda, frozen);
        if h >= -tol {
            state.recompute(x, y, &theta);
            table.rebuild(x, &state);
            (h, which) = table.steepest(&theta, lambda, frozen);
            if h >= -tol {
                converged = true;
                break;
            }
        }
        if steps >= max_steps {
            break;
        }
        let old = theta.get(which);
        let new = match which {
            Coord::Intercept => mu_step(problem, &mut state, &mut theta, &mut scratch),
            Coord::Beta(k) => beta_step(problem, &mut state, &mut theta, k, lambda, &mut scratch)
                .expect("frozen columns are never selected"),
        };
        steps += 1;
        if new == old {
            // the table disagrees with the exact section; rebuild, and give
            // up if that does not help
            idle += 1;
            if idle > 1 {
                break;
            }
            state.recompute(x, y, &theta);
            table.rebuild(x, &state);
            continue;
        }
        idle = 0;
        table.update_after(x, &state, which);
        f = objective_from_residuals(LossKind::L1, &state, &theta, &penalty);
        if let Some(t) = trace.as_mut() {
            t.push(f);
        }
        if steps % window == 0 {
            if rel_change(f_window, f) < config.tol_obj {
                // progress has stalled; stop whether or not the point is stationary
                state.recompute(x, y, &theta);
                table.rebuild(x, &state);
                converged = table.steepest(&theta, lambda, frozen).0 >= -tol;
                break;
            }
            f_window = f;
        }
        if steps % refresh_every == 0 {
            state.recompute(x, y, &theta);
            table.rebuild(x, &state);
        }
    }
    finish(
        LossKind::L1,
        problem,
        &penalty,
        theta,
        &mut state,
        converged,
        steps.div_ceil(window),
        steps,
        trace,
        skipped,
        0,
    )
}

fn cyclic(
    problem: &Problem<'_>,
    lambda: f64,
    config: &FitConfig,
    mut theta: ParameterVector,
    skipped: Vec<usize>,
    frozen: &[bool],
) -> FitResult {
    let x = problem.x();
    let y = problem.y();
    let penalty = PenaltySpec::Lasso { lambda };
    let tol = tol_kkt(lambda);
    let mut state = ResidualState::from_scratch(x, y, &theta);
    let mut scratch = Vec::with_capacity(problem.n() + 1);
    let mut f = objective_from_residuals(LossKind::L1, &state, &theta, &penalty);
    let mut trace = config.trace.then(|| vec![f]);
    let mut updates = 0;
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut moved = false;
        let mut lowest = f64::INFINITY;
        let coords = core::iter::once(Coord::Intercept).chain((0..problem.p()).map(Coord::Beta));
        for which in coords {
            if let Coord::Beta(k) = which {
                if frozen[k] {
                    continue;
                }
            }
            let pen = |dir| match which {
                Coord::Intercept => 0.0,
                Coord::Beta(k) => lasso_dir(lambda, theta.beta[k], dir),
            };
            let fwd = loss_dir(LossKind::L1, x, &state, which, Direction::Forward) + pen(Direction::Forward);
            let bwd = loss_dir(LossKind::L1, x, &state, which, Direction::Backward) + pen(Direction::Backward);
            if fwd >= 0.0 && bwd >= 0.0 {
                continue;
            }
            lowest = lowest.min(fwd.min(bwd));
            let old = theta.get(which);
            let new = match which {
                Coord::Intercept => mu_step(problem, &mut state, &mut theta, &mut scratch),
                Coord::Beta(k) => beta_step(problem, &mut state, &mut theta, k, lambda, &mut scratch)
                    .expect("frozen columns are never selected"),
            };
            updates += 1;
            moved |= new != old;
        }
        state.end_sweep(x, y, &theta);
        let f_new = objective_from_residuals(LossKind::L1, &state, &theta, &penalty);
        if let Some(t) = trace.as_mut() {
            t.push(f_new);
        }
        let stalled = rel_change(f, f_new) < config.tol_obj;
        f = f_new;
        if !moved {
            converged = lowest >= -tol;
            break;
        }
        if stalled {
            state.recompute(x, y, &theta);
            let st = steepest_descent_score(LossKind::L1, x, &state, &theta, &penalty);
            converged = st.h >= -tol;
            break;
        }
    }
    let usable = 1 + problem.p() - skipped.len();
    let mut fit = finish(
        LossKind::L1,
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

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::objective::{dir_deriv, objective};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wp(list: &[(f64, f64)]) -> Vec<WeightedPoint> {
        list.iter().map(|&(z, w)| WeightedPoint::new(z, w)).collect()
    }

    #[test]
    fn plain_and_single_point_medians() {
        assert_eq!(weighted_median(&mut wp(&[(1.0, 1.0), (2.0, 1.0), (3.0, 1.0)])).unwrap(), 2.0);
        assert_eq!(weighted_median(&mut wp(&[(7.0, 5.0)])).unwrap(), 7.0);
        assert!(weighted_median(&mut []).is_err());
        assert!(weighted_median(&mut wp(&[(1.0, 0.0)])).is_err());
    }

    #[test]
    fn weighted_median_matches_candidate_scan() {
        let pts = [(0.0, 1.0), (1.0, 3.0), (10.0, 1.0)];
        let cost = |b: f64| pts.iter().map(|(z, w)| w * (z - b).abs()).sum::<f64>();
        let best = pts.iter().map(|p| p.0).fold((f64::INFINITY, 0.0), |acc, z| {
            if cost(z) < acc.0 { (cost(z), z) } else { acc }
        });
        assert_eq!(best.1, 1.0);
        assert_eq!(weighted_median(&mut wp(&pts)).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_locations_are_merged() {
        // 1 and 1 together hold half the weight
        assert_eq!(weighted_median(&mut wp(&[(3.0, 2.0), (1.0, 1.0), (1.0, 1.0)])).unwrap(), 1.0);
    }

    fn single(y: &[f64]) -> (DesignMatrix, Vec<f64>) {
        (DesignMatrix::from_col_major(y.len(), 1, vec![0.0; y.len()]).unwrap(), y.to_vec())
    }

    #[test]
    fn mu_update_is_median() {
        let (x, y) = single(&[1.0, 2.0, 9.0]);
        let pr = Problem::new(&x, &y).unwrap();
        let mut th = ParameterVector::zeros(1);
        let mut s = ResidualState::from_scratch(&x, &y, &th);
        assert_eq!(update_mu_l1(&pr, &mut s, &mut th), 2.0);
    }

    #[test]
    fn mu_update_even_n_takes_lower_middle() {
        let (x, y) = single(&[1.0, 3.0]);
        let pr = Problem::new(&x, &y).unwrap();
        let mut th = ParameterVector::zeros(1);
        let mut s = ResidualState::from_scratch(&x, &y, &th);
        assert_eq!(update_mu_l1(&pr, &mut s, &mut th), 1.0);
    }

    #[test]
    fn mu_update_beats_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..15).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let x = DesignMatrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..15).map(|_| rng.random_range(-4.0..4.0)).collect();
        let pr = Problem::new(&x, &y).unwrap();
        let mut th = ParameterVector::new(0.0, vec![0.3, -0.2, 1.0]).unwrap();
        let mut s = ResidualState::from_scratch(&x, &y, &th);
        update_mu_l1(&pr, &mut s, &mut th);
        let pen = PenaltySpec::Lasso { lambda: 0.0 };
        let g = objective(LossKind::L1, &x, &y, &th, &pen).unwrap();
        for _ in 0..100 {
            let mut alt = th.clone();
            alt.mu = rng.random_range(-6.0..6.0);
            assert!(g <= objective(LossKind::L1, &x, &y, &alt, &pen).unwrap() + 1e-12);
        }
    }

    fn one_obs(lambda: f64) -> f64 {
        let x = DesignMatrix::from_rows(&[[2.0]]).unwrap();
        let y = [4.0];
        let pr = Problem::new(&x, &y).unwrap();
        let mut th = ParameterVector::zeros(1);
        let mut s = ResidualState::from_scratch(&x, &y, &th);
        update_beta_k_l1(&pr, &mut s, &mut th, 0, lambda).unwrap()
    }

    #[test]
    fn beta_update_single_observation() {
        // f(b) = |4 - 2b| + lambda |b| on the breakpoints {0, 2}
        let f = |b: f64, l: f64| (4.0 - 2.0 * b).abs() + l * b.abs();
        assert_eq!(one_obs(0.0), 2.0);
        assert!(f(2.0, 1.0) < f(0.0, 1.0));
        assert_eq!(one_obs(1.0), 2.0);
        assert!(f(0.0, 3.0) < f(2.0, 3.0));
        assert_eq!(one_obs(3.0), 0.0);
    }

    #[test]
    fn all_zero_column_without_penalty_errors() {
        let (x, y) = single(&[1.0, 2.0]);
        let pr = Problem::new(&x, &y).unwrap();
        let mut th = ParameterVector::zeros(1);
        let mut s = ResidualState::from_scratch(&x, &y, &th);
        assert_eq!(
            update_beta_k_l1(&pr, &mut s, &mut th, 0, 0.0),
            Err(Error::ZeroVarianceColumn(0))
        );
    }

    fn random_problem(seed: u64, n: usize, p: usize) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = (0..n).map(|i| 2.0 * rows[i][0] - rows[i][1] + rng.random_range(-1.0..1.0)).collect();
        (DesignMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn table_stays_consistent_with_scratch() {
        let (x, y) = random_problem(5, 20, 6);
        let pr = Problem::new(&x, &y).unwrap();
        let lambda = 0.4;
        let pen = PenaltySpec::Lasso { lambda };
        let mut th = ParameterVector::zeros(6);
        let mut s = ResidualState::from_scratch(&x, &y, &th).with_period(usize::MAX);
        let mut table = L1DerivativeTable::build(&x, &s);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let which = if rng.random_bool(0.2) { Coord::Intercept } else { Coord::Beta(rng.random_range(0..6)) };
            match which {
                Coord::Intercept => {
                    update_mu_l1(&pr, &mut s, &mut th);
                }
                Coord::Beta(k) => {
                    update_beta_k_l1(&pr, &mut s, &mut th, k, lambda).unwrap();
                }
            }
            table.update_after(&x, &s, which);
            for c in core::iter::once(Coord::Intercept).chain((0..6).map(Coord::Beta)) {
                for dir in [Direction::Forward, Direction::Backward] {
                    let scratch = dir_deriv(LossKind::L1, &x, &s, &th, &pen, c, dir);
                    assert!((table.derivative(c, dir, &th, lambda) - scratch).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn huge_lambda_gives_median_intercept() {
        let (x, y) = random_problem(9, 21, 4);
        let pr = Problem::new(&x, &y).unwrap();
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        for strategy in [Strategy::Greedy, Strategy::Cyclic] {
            let fit = fit_l1(&pr, 1e3, &FitConfig::default().with_strategy(strategy), None).unwrap();
            assert!(fit.converged);
            assert!(fit.active_set.is_empty());
            assert_eq!(fit.theta.mu, sorted[10]);
        }
    }

    #[test]
    fn fits_descend_and_terminate_stationary() {
        for seed in 0..10 {
            let (x, y) = random_problem(seed, 30, 8);
            let pr = Problem::new(&x, &y).unwrap();
            for strategy in [Strategy::Greedy, Strategy::Cyclic] {
                let cfg = FitConfig::default().with_strategy(strategy).with_trace();
                let fit = fit_l1(&pr, 2.0, &cfg, None).unwrap();
                let tr = fit.trace.as_ref().unwrap();
                for w in tr.windows(2) {
                    assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
                }
                let pen = PenaltySpec::Lasso { lambda: 2.0 };
                let f = objective(LossKind::L1, &x, &y, &fit.theta, &pen).unwrap();
                assert!((f - fit.objective).abs() <= 1e-10 * f);
                if fit.converged {
                    let s = ResidualState::from_scratch(&x, &y, &fit.theta);
                    let st = steepest_descent_score(LossKind::L1, &x, &s, &fit.theta, &pen);
                    assert!(st.h >= -tol_kkt(2.0));
                }
            }
        }
    }
}
