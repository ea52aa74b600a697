//! Residual bookkeeping: `r_i = y_i - mu - x_i' beta`, maintained
//! incrementally and refreshed from scratch on a fixed sweep period.

use alloc::vec::Vec;

use crate::model::{Coord, DesignMatrix, ParameterVector};

/// Full recompute happens after this many sweeps.
pub const RECOMPUTE_PERIOD: usize = 100;

/// Relative size below which a residual counts as exactly zero for the
/// l1 derivative case table.
pub const ZERO_RESIDUAL_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualSign {
    Positive,
    Negative,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualState {
    r: Vec<f64>,
    zero_tol: Vec<f64>,
    stale_sweeps: usize,
    updates_since_refresh: usize,
    period: usize,
}

impl ResidualState {
    pub fn from_scratch(x: &DesignMatrix, y: &[f64], theta: &ParameterVector) -> Self {
        let mut state = Self {
            r: Vec::new(),
            zero_tol: y.iter().map(|v| ZERO_RESIDUAL_REL * (1.0 + v.abs())).collect(),
            stale_sweeps: 0,
            updates_since_refresh: 0,
            period: RECOMPUTE_PERIOD,
        };
        state.recompute(x, y, theta);
        state
    }

    /// Residuals given directly, e.g. for fixtures; the zero tolerance is
    /// taken relative to the residuals themselves.
    pub fn from_residuals(r: Vec<f64>) -> Self {
        Self {
            zero_tol: r.iter().map(|v| ZERO_RESIDUAL_REL * (1.0 + v.abs())).collect(),
            r,
            stale_sweeps: 0,
            updates_since_refresh: 0,
            period: RECOMPUTE_PERIOD,
        }
    }

    pub fn with_period(mut self, period: usize) -> Self {
        self.period = period.max(1);
        self
    }

    #[inline]
    pub fn residuals(&self) -> &[f64] {
        &self.r
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.r[i]
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn stale_sweeps(&self) -> usize {
        self.stale_sweeps
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    #[inline]
    pub fn sign(&self, i: usize) -> ResidualSign {
        let r = self.r[i];
        if r.abs() <= self.zero_tol[i] {
            ResidualSign::Zero
        } else if r > 0.0 {
            ResidualSign::Positive
        } else {
            ResidualSign::Negative
        }
    }

    /// Moves `which` from `old` to `new`: the intercept shifts every
    /// residual by `old - new`, coordinate `k` by `x_ik (old - new)`.
    pub fn apply_update(&mut self, x: &DesignMatrix, which: Coord, old: f64, new: f64) {
        let delta = old - new;
        self.updates_since_refresh += 1;
        if delta == 0.0 {
            return;
        }
        match which {
            Coord::Intercept => self.r.iter_mut().for_each(|r| *r += delta),
            Coord::Beta(k) => {
                for (r, &v) in self.r.iter_mut().zip(x.column(k)) {
                    *r += v * delta;
                }
            }
        }
    }

    /// Marks the end of a sweep; recomputes from scratch once the period
    /// elapses. Returns whether a recompute happened.
    pub fn end_sweep(&mut self, x: &DesignMatrix, y: &[f64], theta: &ParameterVector) -> bool {
        self.stale_sweeps += 1;
        if self.stale_sweeps >= self.period {
            self.recompute(x, y, theta);
            true
        } else {
            false
        }
    }

    pub fn recompute(&mut self, x: &DesignMatrix, y: &[f64], theta: &ParameterVector) {
        self.r.clear();
        self.r.extend(y.iter().map(|v| v - theta.mu));
        for (k, &b) in theta.beta.iter().enumerate() {
            if b != 0.0 {
                for (r, &v) in self.r.iter_mut().zip(x.column(k)) {
                    *r -= v * b;
                }
            }
        }
        self.stale_sweeps = 0;
        self.updates_since_refresh = 0;
    }

    #[inline]
    pub(crate) fn dot(&self, col: &[f64]) -> f64 {
        self.r.iter().zip(col).map(|(r, v)| r * v).sum()
    }

    #[inline]
    pub(crate) fn sum(&self) -> f64 {
        self.r.iter().sum()
    }

    pub(crate) fn sum_sq(&self) -> f64 {
        self.r.iter().map(|r| r * r).sum()
    }

    pub(crate) fn sum_abs(&self) -> f64 {
        self.r.iter().map(|r| r.abs()).sum()
    }
}
