//! Data model shared by every solver: the design matrix, the parameter
//! vector, penalties, and fit results.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Dense `n x p` predictor matrix stored column-major, so that a column is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
    names: Option<Vec<String>>,
}

impl DesignMatrix {
    /// Builds a matrix from column-major storage.
    pub fn from_col_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("design matrix has no cases"));
        }
        if p == 0 {
            return Err(Error::Empty("design matrix has no predictors"));
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "design matrix storage",
                expected: n * p,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        Ok(Self {
            n,
            p,
            data,
            names: None,
        })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * p);
        for col in &columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "column length",
                    expected: n,
                    found: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Self::from_col_major(n, p, data)
    }

    /// Builds a matrix from row slices; convenient for small fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = vec![0.0; n * p];
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: p,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        Self::from_col_major(n, p, data)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "column names",
                expected: self.p,
                found: names.len(),
            });
        }
        self.names = Some(names);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    /// Copy of the rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * self.p);
        for j in 0..self.p {
            let col = self.column(j);
            data.extend(rows.iter().map(|&i| col[i]));
        }
        let mut out = Self::from_col_major(m, self.p, data)?;
        out.names.clone_from(&self.names);
        Ok(out)
    }

    /// Copy of the columns listed in `cols`, in that order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(self.n * cols.len());
        for &j in cols {
            data.extend_from_slice(self.column(j));
        }
        let mut out = Self::from_col_major(self.n, cols.len(), data)?;
        if let Some(names) = &self.names {
            out.names = Some(cols.iter().map(|&j| names[j].clone()).collect());
        }
        Ok(out)
    }

    pub fn col_sq_norms(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| self.column(j).iter().map(|v| v * v).sum())
            .collect()
    }

    /// Linear predictor `mu + X beta`.
    pub fn predict(&self, theta: &ParameterVector) -> Vec<f64> {
        let mut out = vec![theta.mu; self.n];
        for (j, &b) in theta.beta.iter().enumerate() {
            if b != 0.0 {
                for (o, &v) in out.iter_mut().zip(self.column(j)) {
                    *o += v * b;
                }
            }
        }
        out
    }
}

/// `theta = (mu, beta_1, ..., beta_p)`; the intercept is never penalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub mu: f64,
    pub beta: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(p: usize) -> Self {
        Self {
            mu: 0.0,
            beta: vec![0.0; p],
        }
    }

    pub fn new(mu: f64, beta: Vec<f64>) -> Result<Self> {
        if !mu.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self { mu, beta })
    }

    #[inline]
    pub fn get(&self, which: Coord) -> f64 {
        match which {
            Coord::Intercept => self.mu,
            Coord::Beta(k) => self.beta[k],
        }
    }

    #[inline]
    pub fn set(&mut self, which: Coord, value: f64) {
        match which {
            Coord::Intercept => self.mu = value,
            Coord::Beta(k) => self.beta[k] = value,
        }
    }

    pub fn active_set(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.beta.iter().map(|b| b.abs()).sum()
    }
}

/// A coordinate of `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Coord {
    Intercept,
    Beta(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Sum of absolute residuals.
    L1,
    /// Half the residual sum of squares.
    L2,
}

/// Partition of the predictors into `q` disjoint, nonempty groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl GroupStructure {
    /// `assignment[k]` is the zero-based group of predictor `k`. Every group
    /// index in `0..q` must be used.
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::Empty("group assignment"));
        }
        let q = assignment.iter().max().map_or(0, |&g| g + 1);
        let mut members = vec![Vec::new(); q];
        for (k, &g) in assignment.iter().enumerate() {
            members[g].push(k);
        }
        if let Some(g) = members.iter().position(Vec::is_empty) {
            return Err(invalid(alloc::format!("group {g} has no members")));
        }
        Ok(Self {
            assignment,
            members,
        })
    }

    /// Consecutive groups of `size` predictors (the last one may be short).
    pub fn contiguous(p: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(invalid("group size must be positive"));
        }
        Self::new((0..p).map(|k| k / size).collect())
    }

    pub fn q(&self) -> usize {
        self.members.len()
    }

    pub fn p(&self) -> usize {
        self.assignment.len()
    }

    #[inline]
    pub fn group_of(&self, k: usize) -> usize {
        self.assignment[k]
    }

    #[inline]
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Restriction to the predictors in `cols`, renumbering both predictors
    /// and the surviving groups.
    pub fn restrict(&self, cols: &[usize]) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.q()];
        let mut next = 0;
        let assignment = cols
            .iter()
            .map(|&k| {
                let g = self.assignment[k];
                if remap[g] == usize::MAX {
                    remap[g] = next;
                    next += 1;
                }
                remap[g]
            })
            .collect();
        Self::new(assignment)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PenaltySpec {
    Lasso {
        lambda: f64,
    },
    Group {
        lambda1: f64,
        lambda2: f64,
        groups: GroupStructure,
    },
}

impl PenaltySpec {
    pub fn lasso(lambda: f64) -> Result<Self> {
        check_tuning(lambda, "lambda")?;
        Ok(Self::Lasso { lambda })
    }

    pub fn group(lambda1: f64, lambda2: f64, groups: GroupStructure) -> Result<Self> {
        check_tuning(lambda1, "lambda1")?;
        check_tuning(lambda2, "lambda2")?;
        Ok(Self::Group {
            lambda1,
            lambda2,
            groups,
        })
    }

    /// Penalty value at `theta`.
    pub fn value(&self, theta: &ParameterVector) -> f64 {
        match self {
            Self::Lasso { lambda } => lambda * theta.l1_norm(),
            Self::Group {
                lambda1,
                lambda2,
                groups,
            } => {
                let mut two = 0.0;
                for j in 0..groups.q() {
                    two += group_norm(&theta.beta, groups.members(j));
                }
                lambda2 * two + lambda1 * theta.l1_norm()
            }
        }
    }

    /// The total weight on a coordinate at zero, used for stationarity
    /// tolerances.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Lasso { lambda } => *lambda,
            Self::Group {
                lambda1, lambda2, ..
            } => lambda1 + lambda2,
        }
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        match self {
            Self::Lasso { lambda } => check_tuning(*lambda, "lambda"),
            Self::Group {
                lambda1,
                lambda2,
                groups,
            } => {
                check_tuning(*lambda1, "lambda1")?;
                check_tuning(*lambda2, "lambda2")?;
                if groups.p() != p {
                    return Err(Error::DimensionMismatch {
                        what: "group assignment",
                        expected: p,
                        found: groups.p(),
                    });
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn check_tuning(v: f64, name: &'static str) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(name));
    }
    if v < 0.0 {
        return Err(invalid(alloc::format!("{name} must be nonnegative")));
    }
    Ok(())
}

pub(crate) fn group_norm(beta: &[f64], members: &[usize]) -> f64 {
    libm::sqrt(members.iter().map(|&k| beta[k] * beta[k]).sum())
}

/// Stationarity tolerance for a penalty of total weight `lambda`.
#[inline]
pub fn tol_kkt(lambda: f64) -> f64 {
    1e-6 * (1.0 + lambda)
}

/// Outcome of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta: ParameterVector,
    pub active_set: Vec<usize>,
    pub converged: bool,
    /// Full sweeps for cyclic solvers; greedy steps divided by `p + 1`,
    /// rounded up, for greedy ones.
    pub sweeps: usize,
    /// Coordinate updates actually performed (skips excluded).
    pub updates: usize,
    /// Coordinates examined. A cyclic sweep examines the intercept and
    /// every usable coefficient, skipped or not; a greedy step examines one.
    pub visits: usize,
    pub objective: f64,
    pub trace: Option<Vec<f64>>,
    /// Predictors skipped because their column is identically zero.
    pub skipped_columns: Vec<usize>,
    /// Greedy steps whose decrease fell short of the `d^2 / (2b)` bound.
    /// Only counted when the fit was asked to certify descent.
    pub certificate_violations: usize,
}

impl FitResult {
    pub fn n_nonzero(&self) -> usize {
        self.active_set.len()
    }
}

/// Borrowed regression data with cached column norms. Validated once and
/// shared by every update kernel.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    x: &'a DesignMatrix,
    y: &'a [f64],
    col_sq: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(x: &'a DesignMatrix, y: &'a [f64]) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::DimensionMismatch {
                what: "response",
                expected: x.n(),
                found: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        Ok(Self {
            x,
            y,
            col_sq: x.col_sq_norms(),
        })
    }

    #[inline]
    pub fn x(&self) -> &'a DesignMatrix {
        self.x
    }

    #[inline]
    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.n()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.p()
    }

    #[inline]
    pub fn col_sq(&self, k: usize) -> f64 {
        self.col_sq[k]
    }

    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq
    }

    pub(crate) fn check_theta(&self, theta: &ParameterVector) -> Result<()> {
        if theta.beta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: self.p(),
                found: theta.beta.len(),
            });
        }
        if !theta.mu.is_finite() || theta.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(())
    }
}
