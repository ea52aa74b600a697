#![allow(dead_code)]

use lassocd_core::{DesignMatrix, ParameterVector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Gaussian design with a sparse linear signal plus noise.
pub fn instance(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (DesignMatrix, Vec<f64>) {
    let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| normal(rng)).collect()).collect();
    let beta: Vec<f64> = (0..p)
        .map(|k| if k < 3 { rng.random_range(-2.0..2.0) } else { 0.0 })
        .collect();
    let mu = rng.random_range(-1.0..1.0);
    let y = (0..n)
        .map(|i| mu + (0..p).map(|k| cols[k][i] * beta[k]).sum::<f64>() + normal(rng))
        .collect();
    (DesignMatrix::from_columns(cols).unwrap(), y)
}

pub fn residuals(x: &DesignMatrix, y: &[f64], theta: &ParameterVector) -> Vec<f64> {
    (0..x.n())
        .map(|i| y[i] - theta.mu - (0..x.p()).map(|k| x.get(i, k) * theta.beta[k]).sum::<f64>())
        .collect()
}

pub fn l2_objective(x: &DesignMatrix, y: &[f64], theta: &ParameterVector, lambda: f64) -> f64 {
    0.5 * residuals(x, y, theta).iter().map(|r| r * r).sum::<f64>()
        + lambda * theta.beta.iter().map(|b| b.abs()).sum::<f64>()
}

pub fn l1_objective(x: &DesignMatrix, y: &[f64], theta: &ParameterVector, lambda: f64) -> f64 {
    residuals(x, y, theta).iter().map(|r| r.abs()).sum::<f64>()
        + lambda * theta.beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// `sum_i r_i x_ik` for every predictor, from scratch.
pub fn gradient_sums(x: &DesignMatrix, y: &[f64], theta: &ParameterVector) -> Vec<f64> {
    let r = residuals(x, y, theta);
    (0..x.p()).map(|k| (0..x.n()).map(|i| r[i] * x.get(i, k)).sum()).collect()
}

/// Largest violation of the lasso subgradient conditions, intercept
/// included.
pub fn lasso_kkt_violation(x: &DesignMatrix, y: &[f64], theta: &ParameterVector, lambda: f64) -> f64 {
    let mut worst = residuals(x, y, theta).iter().sum::<f64>().abs();
    for (k, c) in gradient_sums(x, y, theta).into_iter().enumerate() {
        let b = theta.beta[k];
        let v = if b == 0.0 {
            (c.abs() - lambda).max(0.0)
        } else {
            (c - lambda * b.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Design with a leading column of ones, restricted to `cols`.
fn augmented(x: &DesignMatrix, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.n(), cols.len() + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, cols[j - 1]) })
}

/// Minimizer of `0.5 |y - mu - X_S b|^2 + lambda s'b` over `(mu, b)`,
/// returned on the full coefficient vector.
fn signed_normal_equations(x: &DesignMatrix, y: &[f64], cols: &[usize], signs: &[f64], lambda: f64) -> Option<ParameterVector> {
    let a = augmented(x, cols);
    let mut rhs = a.transpose() * DVector::from_column_slice(y);
    for (j, s) in signs.iter().enumerate() {
        rhs[j + 1] -= lambda * s;
    }
    let sol = (a.transpose() * &a).lu().solve(&rhs)?;
    let mut beta = vec![0.0; x.p()];
    for (j, &k) in cols.iter().enumerate() {
        beta[k] = sol[j + 1];
    }
    Some(ParameterVector { mu: sol[0], beta })
}

/// Exact lasso solution on the support and signs of `theta`.
pub fn polish_lasso(x: &DesignMatrix, y: &[f64], theta: &ParameterVector, lambda: f64) -> ParameterVector {
    let cols = theta.active_set();
    let signs: Vec<f64> = cols.iter().map(|&k| theta.beta[k].signum()).collect();
    signed_normal_equations(x, y, &cols, &signs, lambda).expect("full rank support")
}

/// Least squares with intercept on the columns in `cols`.
pub fn ols(x: &DesignMatrix, y: &[f64], cols: &[usize]) -> ParameterVector {
    signed_normal_equations(x, y, cols, &vec![0.0; cols.len()], 0.0).expect("full rank design")
}

/// Exact l2 lasso minimum for small `p`: every support and sign pattern
/// gives a candidate from its stationarity equations; the minimizer is one
/// of the sign-consistent candidates.
pub fn l2_lasso_oracle(x: &DesignMatrix, y: &[f64], lambda: f64) -> f64 {
    let p = x.p();
    let mut best = l2_objective(x, y, &ols(x, y, &[]), lambda);
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|k| mask >> k & 1 == 1).collect();
        for pattern in 0u32..(1 << cols.len()) {
            let signs: Vec<f64> = (0..cols.len()).map(|j| if pattern >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
            if let Some(theta) = signed_normal_equations(x, y, &cols, &signs, lambda) {
                best = best.min(l2_objective(x, y, &theta, lambda));
            }
        }
    }
    best
}

fn combinations(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        out(cur);
        return;
    }
    for i in start..n {
        if n - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combinations(n, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Exact l1 lasso minimum for small problems. The objective is piecewise
/// linear, so a minimum sits where `p + 1` of the kinks `r_i = 0` and
/// `beta_k = 0` meet; every such vertex is solved for and scored.
pub fn l1_lasso_oracle(x: &DesignMatrix, y: &[f64], lambda: f64) -> f64 {
    let (n, p) = (x.n(), x.p());
    let dim = p + 1;
    let mut best = f64::INFINITY;
    combinations(n + p, dim, 0, &mut Vec::new(), &mut |pick| {
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DVector::zeros(dim);
        for (row, &h) in pick.iter().enumerate() {
            if h < n {
                a[(row, 0)] = 1.0;
                for k in 0..p {
                    a[(row, k + 1)] = x.get(h, k);
                }
                b[row] = y[h];
            } else {
                a[(row, h - n + 1)] = 1.0;
            }
        }
        if let Some(sol) = a.lu().solve(&b) {
            if sol.iter().all(|v| v.is_finite()) {
                let theta = ParameterVector {
                    mu: sol[0],
                    beta: sol.iter().skip(1).copied().collect(),
                };
                best = best.min(l1_objective(x, y, &theta, lambda));
            }
        }
    });
    best
}

/// Non-increasing up to `1e-12 |f|` rounding slack.
pub fn non_increasing(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs())
}
