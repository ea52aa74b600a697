//! Least squares with the mixed penalty
//! `lambda2 sum_j ||gamma_j||_2 + lambda1 sum_j ||gamma_j||_1`, where
//! `gamma_j` is the coefficient subvector of group `j`.
//!
//! Each coordinate update minimizes a surrogate in which the group norm is
//! replaced by its tangent majorizer at the current group, which turns the
//! norm into a ridge term. When every other member of the group is zero the
//! section is exactly a lasso with weight `lambda1 + lambda2`, and that
//! closed form is used instead.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::l2::{finish, rel_change, start_point, update_beta_k_l2, update_mu_l2, FitConfig};
use crate::model::{
    check_tuning, group_norm, tol_kkt, Coord, FitResult, GroupStructure, LossKind, ParameterVector, PenaltySpec, Problem,
};
use crate::objective::objective_from_residuals;
use crate::residual::ResidualState;

/// Tangent majorizer of `||gamma||_2` at `gamma_m`:
/// `||gamma_m|| + (||gamma||^2 - ||gamma_m||^2) / (2 ||gamma_m||)`.
pub fn majorize_norm(gamma: &[f64], gamma_m: &[f64]) -> Result<f64> {
    if gamma.len() != gamma_m.len() {
        return Err(Error::DimensionMismatch {
            what: "anchor",
            expected: gamma.len(),
            found: gamma_m.len(),
        });
    }
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let m = libm::sqrt(sq(gamma_m));
    if !(m > 0.0) {
        return Err(Error::ZeroAnchorNorm);
    }
    Ok(m + (sq(gamma) - m * m) / (2.0 * m))
}

/// Parameters, residuals and per-group norm caches of a group fit.
#[derive(Debug, Clone)]
pub struct GroupFitState {
    pub theta: ParameterVector,
    pub residual: ResidualState,
    sq_norms: Vec<f64>,
    nonzero: Vec<usize>,
}

impl GroupFitState {
    pub fn new(problem: &Problem<'_>, theta: ParameterVector, groups: &GroupStructure) -> Result<Self> {
        problem.check_theta(&theta)?;
        if groups.p() != problem.p() {
            return Err(Error::DimensionMismatch {
                what: "group assignment",
                expected: problem.p(),
                found: groups.p(),
            });
        }
        let residual = ResidualState::from_scratch(problem.x(), problem.y(), &theta);
        let mut state = Self {
            theta,
            residual,
            sq_norms: vec![0.0; groups.q()],
            nonzero: vec![0; groups.q()],
        };
        state.refresh_norms(groups);
        Ok(state)
    }

    /// Cached `||gamma_j||_2`.
    pub fn group_norm(&self, j: usize) -> f64 {
        libm::sqrt(self.sq_norms[j])
    }

    pub fn group_norms(&self) -> Vec<f64> {
        (0..self.sq_norms.len()).map(|j| self.group_norm(j)).collect()
    }

    pub fn refresh_norms(&mut self, groups: &GroupStructure) {
        for j in 0..groups.q() {
            let m = groups.members(j);
            let g = group_norm(&self.theta.beta, m);
            self.sq_norms[j] = g * g;
            self.nonzero[j] = m.iter().filter(|&&k| self.theta.beta[k] != 0.0).count();
        }
    }
}

/// Updates coordinate `k` of its group. Returns the new value.
pub fn update_group_coordinate(
    problem: &Problem<'_>,
    state: &mut GroupFitState,
    groups: &GroupStructure,
    k: usize,
    lambda1: f64,
    lambda2: f64,
) -> Result<f64> {
    let j = groups.group_of(k);
    let old = state.theta.beta[k];
    let others_zero = state.nonzero[j] == usize::from(old != 0.0);
    let anchor = libm::sqrt(state.sq_norms[j]);
    let new = if others_zero || !(anchor > 0.0) {
        update_beta_k_l2(problem, &mut state.residual, &mut state.theta, k, lambda1 + lambda2, 0.0)?
    } else if lambda2 == 0.0 {
        update_beta_k_l2(problem, &mut state.residual, &mut state.theta, k, lambda1, 0.0)?
    } else {
        update_beta_k_l2(problem, &mut state.residual, &mut state.theta, k, lambda1, lambda2 / anchor)?
    };
    let sq = state.sq_norms[j] - old * old + new * new;
    state.nonzero[j] = state.nonzero[j] + usize::from(new != 0.0) - usize::from(old != 0.0);
    state.sq_norms[j] = if state.nonzero[j] == 0 {
        0.0
    } else if sq <= 1e-8 * state.sq_norms[j] {
        // cancellation; rebuild from the members
        let g = group_norm(&state.theta.beta, groups.members(j));
        g * g
    } else {
        sq
    };
    Ok(new)
}

/// Sets group `j` to zero when zero minimizes the objective over the
/// group's block with everything else held fixed, that is when
/// `||S(X_j' r_j, lambda1)||_2 <= lambda2` for the partial residual `r_j`
/// excluding the group. Returns whether the group was zeroed.
pub fn zero_group_if_optimal(
    problem: &Problem<'_>,
    state: &mut GroupFitState,
    groups: &GroupStructure,
    j: usize,
    lambda1: f64,
    lambda2: f64,
) -> bool {
    if state.nonzero[j] == 0 {
        return false;
    }
    let x = problem.x();
    let members = groups.members(j);
    let mut partial = state.residual.residuals().to_vec();
    for &k in members {
        let b = state.theta.beta[k];
        if b != 0.0 {
            for (r, v) in partial.iter_mut().zip(x.column(k)) {
                *r += v * b;
            }
        }
    }
    let mut sq = 0.0;
    for &k in members {
        let c: f64 = partial.iter().zip(x.column(k)).map(|(r, v)| r * v).sum();
        let t = (c.abs() - lambda1).max(0.0);
        sq += t * t;
    }
    if libm::sqrt(sq) > lambda2 {
        return false;
    }
    for &k in members {
        let old = state.theta.beta[k];
        if old != 0.0 {
            state.theta.beta[k] = 0.0;
            state.residual.apply_update(x, Coord::Beta(k), old, 0.0);
        }
    }
    state.sq_norms[j] = 0.0;
    state.nonzero[j] = 0;
    true
}

/// Largest violation of the group stationarity conditions, with
/// `c_k = sum_i r_i x_ik`:
///
/// - intercept: `sum_i r_i = 0`
/// - zero group: `|c_k| <= lambda1 + lambda2` for each member
/// - nonzero group, `beta_k != 0`:
///   `c_k = lambda1 sign(beta_k) + lambda2 beta_k / ||gamma_j||`
/// - nonzero group, `beta_k = 0`: `|c_k| <= lambda1`
///
/// `state` must be consistent with `theta`.
pub fn group_kkt_violation(
    problem: &Problem<'_>,
    state: &ResidualState,
    theta: &ParameterVector,
    lambda1: f64,
    lambda2: f64,
    groups: &GroupStructure,
) -> f64 {
    let x = problem.x();
    let mut worst = state.sum().abs();
    for j in 0..groups.q() {
        let members = groups.members(j);
        let norm = group_norm(&theta.beta, members);
        for &k in members {
            if problem.col_sq(k) == 0.0 {
                continue;
            }
            let c = state.dot(x.column(k));
            let b = theta.beta[k];
            let v = if norm == 0.0 {
                (c.abs() - lambda1 - lambda2).max(0.0)
            } else if b != 0.0 {
                (c - lambda1 * b.signum() - lambda2 * b / norm).abs()
            } else {
                (c.abs() - lambda1).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    worst
}

/// Cyclic coordinate descent for the group-penalized least squares
/// objective. Each sweep first zeroes every group for which zero is the
/// block minimum, then updates the coordinates. `config.strategy` is
/// ignored.
///
/// Converged when the relative objective change over a sweep falls below
/// `tol_obj` and [`group_kkt_violation`] is within
/// `tol_kkt(lambda1 + lambda2)`.
pub fn fit_group(
    problem: &Problem<'_>,
    lambda1: f64,
    lambda2: f64,
    groups: &GroupStructure,
    config: &FitConfig,
    warm_start: Option<&ParameterVector>,
) -> Result<FitResult> {
    check_tuning(lambda1, "lambda1")?;
    check_tuning(lambda2, "lambda2")?;
    config.validate()?;
    let penalty = PenaltySpec::group(lambda1, lambda2, groups.clone())?;
    penalty.validate(problem.p())?;
    let (theta, skipped) = start_point(problem, warm_start)?;
    let x = problem.x();
    let y = problem.y();
    let tol = tol_kkt(lambda1 + lambda2);
    let mut st = GroupFitState::new(problem, theta, groups)?;
    let mut f = objective_from_residuals(LossKind::L2, &st.residual, &st.theta, &penalty);
    let mut trace = config.trace.then(|| vec![f]);
    let mut sweeps = 0;
    let mut updates = 0;
    let mut converged = false;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        update_mu_l2(problem, &mut st.residual, &mut st.theta);
        updates += 1;
        if lambda2 > 0.0 {
            for j in 0..groups.q() {
                if zero_group_if_optimal(problem, &mut st, groups, j, lambda1, lambda2) {
                    updates += 1;
                }
            }
        }
        for k in 0..problem.p() {
            if problem.col_sq(k) == 0.0 {
                continue;
            }
            update_group_coordinate(problem, &mut st, groups, k, lambda1, lambda2)?;
            updates += 1;
        }
        st.refresh_norms(groups);
        st.residual.end_sweep(x, y, &st.theta);
        let f_new = objective_from_residuals(LossKind::L2, &st.residual, &st.theta, &penalty);
        if let Some(t) = trace.as_mut() {
            t.push(f_new);
        }
        let stalled = rel_change(f, f_new) < config.tol_obj;
        f = f_new;
        if stalled {
            st.residual.recompute(x, y, &st.theta);
            if group_kkt_violation(problem, &st.residual, &st.theta, lambda1, lambda2, groups) <= tol {
                converged = true;
                break;
            }
        }
    }
    let GroupFitState {
        theta, mut residual, ..
    } = st;
    Ok(finish(
        LossKind::L2,
        problem,
        &penalty,
        theta,
        &mut residual,
        converged,
        sweeps,
        updates,
        trace,
        skipped,
        0,
    ))
}
