//! Objective evaluation and coordinate directional derivatives.

use crate::error::{Error, Result};
use crate::model::{
    group_norm, Coord, DesignMatrix, Direction, LossKind, ParameterVector, PenaltySpec,
};
use crate::residual::{ResidualSign, ResidualState};

/// `g(theta) + penalty(theta)`, with `g` either the sum of absolute
/// residuals or half the residual sum of squares.
pub fn objective(
    loss: LossKind,
    x: &DesignMatrix,
    y: &[f64],
    theta: &ParameterVector,
    penalty: &PenaltySpec,
) -> Result<f64> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.n(),
            found: y.len(),
        });
    }
    if theta.beta.len() != x.p() {
        return Err(Error::DimensionMismatch {
            what: "coefficient vector",
            expected: x.p(),
            found: theta.beta.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    if !theta.mu.is_finite() || theta.beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("parameter vector"));
    }
    penalty.validate(x.p())?;
    if matches!(penalty, PenaltySpec::Group { .. }) && loss != LossKind::L2 {
        return Err(Error::GroupRequiresL2);
    }
    let fitted = x.predict(theta);
    let g: f64 = match loss {
        LossKind::L1 => y.iter().zip(&fitted).map(|(a, b)| (a - b).abs()).sum(),
        LossKind::L2 => 0.5 * y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
    };
    Ok(g + penalty.value(theta))
}

/// Objective from maintained residuals; no validation.
pub(crate) fn objective_from_residuals(
    loss: LossKind,
    state: &ResidualState,
    theta: &ParameterVector,
    penalty: &PenaltySpec,
) -> f64 {
    let g = match loss {
        LossKind::L1 => state.sum_abs(),
        LossKind::L2 => 0.5 * state.sum_sq(),
    };
    g + penalty.value(theta)
}

/// Directional derivative of the penalty along `+e_k` or `-e_k`.
pub(crate) fn penalty_dir(
    penalty: &PenaltySpec,
    theta: &ParameterVector,
    k: usize,
    dir: Direction,
) -> f64 {
    match penalty {
        PenaltySpec::Lasso { lambda } => lasso_dir(*lambda, theta.beta[k], dir),
        PenaltySpec::Group {
            lambda1,
            lambda2,
            groups,
        } => {
            let b = theta.beta[k];
            let norm = group_norm(&theta.beta, groups.members(groups.group_of(k)));
            let two = if norm == 0.0 {
                *lambda2
            } else {
                let slope = lambda2 * b / norm;
                match dir {
                    Direction::Forward => slope,
                    Direction::Backward => -slope,
                }
            };
            lasso_dir(*lambda1, b, dir) + two
        }
    }
}

#[inline]
pub(crate) fn lasso_dir(lambda: f64, b: f64, dir: Direction) -> f64 {
    match dir {
        Direction::Forward => {
            if b >= 0.0 {
                lambda
            } else {
                -lambda
            }
        }
        Direction::Backward => {
            if b > 0.0 {
                -lambda
            } else {
                lambda
            }
        }
    }
}

/// Directional derivative of the loss part `g` along a coordinate.
pub(crate) fn loss_dir(
    loss: LossKind,
    x: &DesignMatrix,
    state: &ResidualState,
    which: Coord,
    dir: Direction,
) -> f64 {
    match loss {
        LossKind::L2 => {
            let grad = match which {
                Coord::Intercept => -state.sum(),
                Coord::Beta(k) => -state.dot(x.column(k)),
            };
            match dir {
                Direction::Forward => grad,
                Direction::Backward => -grad,
            }
        }
        LossKind::L1 => {
            let mut d = 0.0;
            for i in 0..state.len() {
                let v = match which {
                    Coord::Intercept => 1.0,
                    Coord::Beta(k) => x.get(i, k),
                };
                d += l1_case(state.sign(i), v, dir);
            }
            d
        }
    }
}

/// Contribution of one case to an l1 coordinate derivative.
#[inline]
pub(crate) fn l1_case(sign: ResidualSign, v: f64, dir: Direction) -> f64 {
    match (sign, dir) {
        (ResidualSign::Zero, _) => v.abs(),
        (ResidualSign::Positive, Direction::Forward) | (ResidualSign::Negative, Direction::Backward) => -v,
        (ResidualSign::Negative, Direction::Forward) | (ResidualSign::Positive, Direction::Backward) => v,
    }
}

/// One-sided derivative of the objective along `+e` or `-e` for the given
/// coordinate. The intercept carries no penalty term.
pub fn dir_deriv(
    loss: LossKind,
    x: &DesignMatrix,
    state: &ResidualState,
    theta: &ParameterVector,
    penalty: &PenaltySpec,
    which: Coord,
    dir: Direction,
) -> f64 {
    let g = loss_dir(loss, x, state, which, dir);
    match which {
        Coord::Intercept => g,
        Coord::Beta(k) => g + penalty_dir(penalty, theta, k, dir),
    }
}

/// The most negative coordinate directional derivative and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steepest {
    pub h: f64,
    pub which: Coord,
    pub direction: Direction,
}

/// `h(theta) = min_i min(d_{e_i} f, d_{-e_i} f)` over all `2(p + 1)`
/// coordinate directions. Ties go to the lowest coordinate, forward first.
pub fn steepest_descent_score(
    loss: LossKind,
    x: &DesignMatrix,
    state: &ResidualState,
    theta: &ParameterVector,
    penalty: &PenaltySpec,
) -> Steepest {
    let mut best = Steepest {
        h: f64::INFINITY,
        which: Coord::Intercept,
        direction: Direction::Forward,
    };
    let coords = core::iter::once(Coord::Intercept).chain((0..x.p()).map(Coord::Beta));
    for which in coords {
        for dir in [Direction::Forward, Direction::Backward] {
            let d = dir_deriv(loss, x, state, theta, penalty, which, dir);
            if d < best.h {
                best = Steepest {
                    h: d,
                    which,
                    direction: dir,
                };
            }
        }
    }
    best
}

/// `b = max_j sum_i x_ij^2`, including the intercept column of ones.
pub fn column_bound_b(x: &DesignMatrix) -> f64 {
    x.col_sq_norms().into_iter().fold(x.n() as f64, f64::max)
}
