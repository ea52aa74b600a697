//! Column centering and scaling, with the inverse map for coefficients.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{DesignMatrix, ParameterVector};

/// Per-column mean and standard deviation (divisor `n`). Constant columns
/// keep scale 1, so they standardize to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &DesignMatrix) -> Self {
        let n = x.n() as f64;
        let mut means = Vec::with_capacity(x.p());
        let mut scales = Vec::with_capacity(x.p());
        for j in 0..x.p() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            let s = libm::sqrt(var);
            means.push(m);
            scales.push(if s > 0.0 { s } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn apply(&self, x: &DesignMatrix) -> Result<DesignMatrix> {
        if x.p() != self.means.len() {
            return Err(Error::DimensionMismatch {
                what: "standardized columns",
                expected: self.means.len(),
                found: x.p(),
            });
        }
        let mut data = Vec::with_capacity(x.n() * x.p());
        for j in 0..x.p() {
            let (m, s) = (self.means[j], self.scales[j]);
            data.extend(x.column(j).iter().map(|v| (v - m) / s));
        }
        let out = DesignMatrix::from_col_major(x.n(), x.p(), data)?;
        match x.names() {
            Some(names) => out.with_names(names.to_vec()),
            None => Ok(out),
        }
    }

    /// Coefficients on the original column scale.
    pub fn back_transform(&self, theta: &ParameterVector) -> ParameterVector {
        let beta: Vec<f64> = theta.beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect();
        let shift: f64 = beta.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        ParameterVector {
            mu: theta.mu - shift,
            beta,
        }
    }

    /// Inverse of [`back_transform`](Self::back_transform), for warm starts
    /// given on the original scale.
    pub fn forward_transform(&self, theta: &ParameterVector) -> ParameterVector {
        let shift: f64 = theta.beta.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        ParameterVector {
            mu: theta.mu + shift,
            beta: theta.beta.iter().zip(&self.scales).map(|(b, s)| b * s).collect(),
        }
    }
}

/// Standardized copy of `x` and the transform that produced it.
pub fn standardize(x: &DesignMatrix) -> Result<(DesignMatrix, Standardization)> {
    let st = Standardization::fit(x);
    Ok((st.apply(x)?, st))
}
