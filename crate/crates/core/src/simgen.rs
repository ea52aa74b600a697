//! Synthetic regression data and replicated simulation studies.
//!
//! Predictors are standard normal. The first [`CORRELATED_BLOCK`] columns
//! share a common factor, `sqrt(rho) Z0 + sqrt(1 - rho) Zj`, so they have
//! pairwise correlation `rho`; the rest are independent. Every column is
//! drawn from its own ChaCha stream, so a column can be generated without
//! generating the others. Test sets use this to materialize only the columns
//! a prediction needs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::model::{DesignMatrix, LossKind, ParameterVector, Problem};
use crate::tuning::{
    bracket, golden_section, kfold_split, reestimate_active, tune_timed, Clock, SearchSpec, DEFAULT_REDUCTION, DEFAULT_TOL_REL, Solver,
    TuneOptions, TuningValue,
};

pub const CORRELATED_BLOCK: usize = 10;
/// Nonzero entries of the default true coefficient vector.
pub const DEFAULT_SUPPORT: usize = 5;

const Z0_STREAM: u64 = 0;
const NOISE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Normal,
    /// Laplace with scale 1: mean absolute value 1, variance 2.
    Laplace,
    /// Noise-free responses.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub p: usize,
    pub n: usize,
    pub n_test: usize,
    pub rho: f64,
    pub noise: Noise,
    /// Defaults to 1 on the first five predictors, 0 elsewhere.
    pub beta_true: Option<Vec<f64>>,
    pub mu_true: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(p: usize, n: usize, rho: f64, noise: Noise, seed: u64) -> Self {
        Self {
            p,
            n,
            n_test: 20_000,
            rho,
            noise,
            beta_true: None,
            mu_true: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(invalid("p and n must be positive"));
        }
        if self.n_test == 0 {
            return Err(invalid("n_test must be positive"));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(invalid("rho must lie in [0, 1)"));
        }
        if !self.mu_true.is_finite() {
            return Err(Error::NonFinite("mu_true"));
        }
        if let Some(b) = &self.beta_true {
            if b.len() != self.p {
                return Err(Error::DimensionMismatch {
                    what: "beta_true",
                    expected: self.p,
                    found: b.len(),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("beta_true"));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> ParameterVector {
        let beta = self
            .beta_true
            .clone()
            .unwrap_or_else(|| (0..self.p).map(|j| if j < DEFAULT_SUPPORT { 1.0 } else { 0.0 }).collect());
        ParameterVector {
            mu: self.mu_true,
            beta,
        }
    }
}

/// SplitMix64 finalizer of `base` mixed with `tag`; used to derive
/// independent seeds.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normals(seed: u64, id: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, id);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Design whose columns are generated on first use and cached.
#[derive(Debug, Clone)]
pub struct LazyDesign {
    n: usize,
    p: usize,
    rho: f64,
    seed: u64,
    z0: Option<Vec<f64>>,
    cols: BTreeMap<usize, Vec<f64>>,
}

impl LazyDesign {
    pub fn new(n: usize, p: usize, rho: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            rho,
            seed,
            z0: None,
            cols: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&mut self, j: usize) -> &[f64] {
        assert!(j < self.p, "column {j} out of range");
        if !self.cols.contains_key(&j) {
            let col = self.generate(j);
            self.cols.insert(j, col);
        }
        &self.cols[&j]
    }

    fn generate(&mut self, j: usize) -> Vec<f64> {
        let z = normals(self.seed, j as u64 + 1, self.n);
        if j >= CORRELATED_BLOCK || self.rho == 0.0 {
            return z;
        }
        let (n, seed) = (self.n, self.seed);
        let z0 = self.z0.get_or_insert_with(|| normals(seed, Z0_STREAM, n));
        let (a, b) = (libm::sqrt(self.rho), libm::sqrt(1.0 - self.rho));
        z0.iter().zip(&z).map(|(u, v)| a * u + b * v).collect()
    }

    /// `mu + sum_j beta_j x_j`, touching only the columns with nonzero
    /// coefficients.
    pub fn predict(&mut self, theta: &ParameterVector) -> Vec<f64> {
        let mut out = vec![theta.mu; self.n];
        for (j, &b) in theta.beta.iter().enumerate() {
            if b != 0.0 {
                for (o, v) in out.iter_mut().zip(self.column(j)) {
                    *o += b * v;
                }
            }
        }
        out
    }

    pub fn materialize(&mut self) -> Result<DesignMatrix> {
        let mut data = Vec::with_capacity(self.n * self.p);
        for j in 0..self.p {
            data.extend_from_slice(self.column(j));
        }
        self.cols.clear();
        DesignMatrix::from_col_major(self.n, self.p, data)
    }
}

fn design_seed(config: &SimConfig) -> u64 {
    derive_seed(config.seed, 1)
}

fn test_seed(config: &SimConfig) -> u64 {
    derive_seed(config.seed, 2)
}

/// Training design of `config.n` cases.
pub fn gen_design(config: &SimConfig) -> Result<DesignMatrix> {
    config.validate()?;
    LazyDesign::new(config.n, config.p, config.rho, design_seed(config)).materialize()
}

fn noise(kind: Noise, seed: u64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, NOISE_STREAM);
    (0..n)
        .map(|_| match kind {
            Noise::Normal => rng.sample(StandardNormal),
            Noise::Laplace => {
                // inverse cdf; reject u = 0 so the log stays finite
                let mut u: f64 = rng.random();
                while u == 0.0 {
                    u = rng.random();
                }
                let v = u - 0.5;
                -v.signum() * libm::log(1.0 - 2.0 * v.abs())
            }
            Noise::Zero => 0.0,
        })
        .collect()
}

/// `y = mu_true + X beta_true + eps` for the training design.
pub fn gen_response(x: &DesignMatrix, config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if x.p() != config.p {
        return Err(Error::DimensionMismatch {
            what: "design columns",
            expected: config.p,
            found: x.p(),
        });
    }
    let mut y = x.predict(&config.truth());
    for (v, e) in y.iter_mut().zip(noise(config.noise, design_seed(config), x.n())) {
        *v += e;
    }
    Ok(y)
}

/// Held-out cases drawn from the same model as the training data.
#[derive(Debug, Clone)]
pub struct TestSet {
    design: LazyDesign,
    y: Vec<f64>,
}

impl TestSet {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let seed = test_seed(config);
        let mut design = LazyDesign::new(config.n_test, config.p, config.rho, seed);
        let mut y = design.predict(&config.truth());
        for (v, e) in y.iter_mut().zip(noise(config.noise, seed, config.n_test)) {
            *v += e;
        }
        Ok(Self { design, y })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn error(&mut self, loss: LossKind, theta: &ParameterVector) -> f64 {
        let fitted = self.design.predict(theta);
        metric(loss, &self.y, &fitted)
    }
}

fn metric(loss: LossKind, y: &[f64], fitted: &[f64]) -> f64 {
    let n = y.len() as f64;
    match loss {
        LossKind::L1 => y.iter().zip(fitted).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
        LossKind::L2 => y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
    }
}

/// Prediction error matched to the loss: mean absolute error for l1, mean
/// squared error for l2.
pub fn evaluate(loss: LossKind, theta: &ParameterVector, x: &DesignMatrix, y: &[f64]) -> Result<f64> {
    if y.len() != x.n() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: x.n(),
            found: y.len(),
        });
    }
    if theta.beta.len() != x.p() {
        return Err(Error::DimensionMismatch {
            what: "coefficients",
            expected: x.p(),
            found: theta.beta.len(),
        });
    }
    Ok(metric(loss, y, &x.predict(theta)))
}

/// How each replicate is fitted and tuned.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub solver: Solver,
    pub search: SearchSpec,
    pub folds: usize,
    pub options: TuneOptions,
    /// Also locate the tuning constant minimizing test error.
    pub test_optimal: bool,
}

impl StudySpec {
    pub fn new(solver: Solver) -> Self {
        Self {
            solver,
            search: SearchSpec::bracket_default(),
            folds: 10,
            options: TuneOptions::default(),
            test_optimal: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub lambda_star: TuningValue,
    /// Tuning constant minimizing test error over the same search, when
    /// requested.
    pub lambda_test_opt: Option<f64>,
    pub cv_error: f64,
    pub test_error_true: f64,
    pub test_error_fit: f64,
    pub n_nonzero: usize,
    pub n_true: usize,
    pub fit_seconds: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub result: core::result::Result<ReplicateRow, String>,
}

/// Seed of replicate `r` of a study seeded with `seed`.
pub fn replicate_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, 1_000 + r as u64)
}

fn lambda_scalar(v: TuningValue) -> f64 {
    match v {
        TuningValue::Lasso(l) => l,
        TuningValue::Group { lambda1, lambda2 } => lambda1 + lambda2,
    }
}

/// Runs replicate `r`: fresh data, tuning by cross-validation, refit on the
/// full training set, scoring on the test set.
pub fn run_replicate(config: &SimConfig, spec: &StudySpec, r: usize, clock: &dyn Clock) -> ReplicateOutcome {
    let seed = replicate_seed(config.seed, r);
    let result = replicate_row(config, spec, r, seed, clock).map_err(|e| e.to_string());
    ReplicateOutcome {
        replicate: r,
        seed,
        result,
    }
}

fn replicate_row(config: &SimConfig, spec: &StudySpec, r: usize, seed: u64, clock: &dyn Clock) -> Result<ReplicateRow> {
    let cfg = SimConfig {
        seed,
        ..config.clone()
    };
    let x = gen_design(&cfg)?;
    let y = gen_response(&x, &cfg)?;
    let mut test = TestSet::new(&cfg)?;
    let truth = cfg.truth();
    let loss = spec.solver.loss;
    let folds = kfold_split(cfg.n, spec.folds, derive_seed(seed, 3))?;
    let tuned = tune_timed(&spec.solver, &x, &y, &spec.search, &folds, &spec.options, clock)?;
    let lambda_test_opt = if spec.test_optimal {
        Some(test_optimal_lambda(&spec.solver, &x, &y, &mut test, &spec.search, &spec.options)?)
    } else {
        None
    };
    let n_true = tuned.penalized.active_set.iter().filter(|&&k| truth.beta[k] != 0.0).count();
    Ok(ReplicateRow {
        replicate: r,
        seed,
        lambda_star: tuned.best,
        lambda_test_opt,
        cv_error: tuned.best_cv,
        test_error_true: test.error(loss, &truth),
        test_error_fit: test.error(loss, &tuned.refit.theta),
        n_nonzero: tuned.penalized.active_set.len(),
        n_true,
        fit_seconds: tuned.fit_seconds,
        converged: tuned.penalized.converged && tuned.refit.converged,
    })
}

/// Lasso constant minimizing the test error of the (optionally
/// re-estimated) full-data fit, located by the same bracket and golden
/// section search used for cross-validation.
pub fn test_optimal_lambda(
    solver: &Solver,
    x: &DesignMatrix,
    y: &[f64],
    test: &mut TestSet,
    search: &SearchSpec,
    options: &TuneOptions,
) -> Result<f64> {
    if solver.groups.is_some() {
        return Err(invalid("test-optimal search supports lasso solvers only"));
    }
    let (lambda0, r, tol_rel) = match search {
        SearchSpec::BracketGolden { lambda0, r, tol_rel } => (*lambda0, *r, *tol_rel),
        SearchSpec::Grid { .. } => (None, DEFAULT_REDUCTION, DEFAULT_TOL_REL),
    };
    let lambda0 = match lambda0 {
        Some(l) => l,
        None => crate::tuning::default_lambda0(solver.loss, x, y)?,
    };
    let problem = Problem::new(x, y)?;
    let mut memo: BTreeMap<u64, f64> = BTreeMap::new();
    let mut fits: Vec<(f64, ParameterVector)> = Vec::new();
    let mut curve = |s: f64| -> Result<f64> {
        if let Some(&c) = memo.get(&s.to_bits()) {
            return Ok(c);
        }
        let warm = fits
            .iter()
            .filter(|(t, _)| *t > s)
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, w)| w.clone());
        let fit = solver.fit(&problem, TuningValue::Lasso(s), warm.as_ref().filter(|_| options.warm_start))?;
        let theta = if options.reestimate {
            reestimate_active(solver.loss, x, y, &fit.active_set, None, &solver.config)?.theta
        } else {
            fit.theta.clone()
        };
        let c = test.error(solver.loss, &theta);
        memo.insert(s.to_bits(), c);
        fits.push((s, fit.theta));
        Ok(c)
    };
    let br = bracket(&mut curve, lambda0, r, lambda0 * options.floor_ratio)?;
    let s = match br.interval() {
        Some((lo, hi)) => golden_section(&mut curve, lo, hi, tol_rel)?.lambda,
        None => br.best(),
    };
    let b = br.best();
    Ok(if curve(s)? <= curve(b)? { s } else { b })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    /// Standard deviation over `sqrt(count)`; 0 for a single value.
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let m = values.len() as f64;
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / m;
        if values.len() < 2 {
            return Self { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        Self {
            mean,
            se: libm::sqrt(var / m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub replicates: usize,
    pub failed: usize,
    pub unconverged: usize,
    pub lambda_star: MeanSe,
    pub lambda_test_opt: Option<MeanSe>,
    pub test_error_true: MeanSe,
    pub test_error_fit: MeanSe,
    pub n_nonzero: MeanSe,
    pub n_true: MeanSe,
    pub fit_seconds: MeanSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub rows: Vec<ReplicateOutcome>,
    pub summary: StudySummary,
}

pub fn summarize(rows: &[ReplicateOutcome]) -> StudySummary {
    let ok: Vec<&ReplicateRow> = rows.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let col = |f: &dyn Fn(&ReplicateRow) -> f64| MeanSe::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    let opt: Vec<f64> = ok.iter().filter_map(|r| r.lambda_test_opt).collect();
    StudySummary {
        replicates: rows.len(),
        failed: rows.len() - ok.len(),
        unconverged: ok.iter().filter(|r| !r.converged).count(),
        lambda_star: col(&|r| lambda_scalar(r.lambda_star)),
        lambda_test_opt: (!opt.is_empty()).then(|| MeanSe::of(&opt)),
        test_error_true: col(&|r| r.test_error_true),
        test_error_fit: col(&|r| r.test_error_fit),
        n_nonzero: col(&|r| r.n_nonzero as f64),
        n_true: col(&|r| r.n_true as f64),
        fit_seconds: col(&|r| r.fit_seconds),
    }
}

/// Runs `replicates` replicates in index order.
pub fn replicate_study(config: &SimConfig, spec: &StudySpec, replicates: usize, clock: &dyn Clock) -> Result<Study> {
    config.validate()?;
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    let rows: Vec<ReplicateOutcome> = (0..replicates).map(|r| run_replicate(config, spec, r, clock)).collect();
    Ok(Study {
        summary: summarize(&rows),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l2::FitConfig;
    use crate::tuning::NoClock;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / libm::sqrt(saa * sbb)
    }

    #[test]
    fn independent_columns_at_rho_zero() {
        let cfg = SimConfig::new(12, 5000, 0.0, Noise::Normal, 0);
        let x = gen_design(&cfg).unwrap();
        let tol = 3.0 / libm::sqrt(5000.0);
        for a in 0..10 {
            for b in a + 1..10 {
                assert!(corr(x.column(a), x.column(b)).abs() < tol);
            }
        }
    }

    #[test]
    fn correlated_block_moments() {
        let cfg = SimConfig::new(12, 5000, 0.8, Noise::Normal, 0);
        let x = gen_design(&cfg).unwrap();
        let tol = 3.0 / libm::sqrt(5000.0);
        assert!((corr(x.column(0), x.column(1)) - 0.8).abs() < tol);
        assert!(corr(x.column(10), x.column(0)).abs() < tol);
        for j in 0..12 {
            let c = x.column(j);
            let m = c.iter().sum::<f64>() / 5000.0;
            let v = c.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / 5000.0;
            assert!((v - 1.0).abs() < tol, "column {j} variance {v}");
        }
    }

    #[test]
    fn standardized_moments_across_seeds() {
        // sqrt(n) corr ~ N(0, 1) and sqrt(n) (var - 1) ~ N(0, 2)
        let n = 2000;
        let root = libm::sqrt(n as f64);
        let mut zc = Vec::new();
        let mut zv = Vec::new();
        for seed in 0..60 {
            let x = gen_design(&SimConfig::new(12, n, 0.0, Noise::Normal, seed)).unwrap();
            for a in 0..6 {
                zc.push(corr(x.column(a), x.column(a + 6)) * root);
                let c = x.column(a);
                let m = c.iter().sum::<f64>() / n as f64;
                zv.push((c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64 - 1.0) * root);
            }
        }
        let sd = |v: &[f64]| libm::sqrt(v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64);
        assert!((sd(&zc) - 1.0).abs() < 0.15);
        assert!((sd(&zv) - libm::sqrt(2.0)).abs() < 0.2);
    }

    #[test]
    fn noise_moments() {
        let n = 5000;
        let tol = 3.0 / libm::sqrt(n as f64);
        let mut cfg = SimConfig::new(3, n, 0.0, Noise::Normal, 3);
        cfg.beta_true = Some(vec![0.0; 3]);
        let x = gen_design(&cfg).unwrap();
        let y = gen_response(&x, &cfg).unwrap();
        let mean_abs = y.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        assert!((mean_abs - libm::sqrt(2.0 / core::f64::consts::PI)).abs() < tol);

        cfg.noise = Noise::Laplace;
        let y = gen_response(&x, &cfg).unwrap();
        let mean_abs = y.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
        let m = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        assert!((mean_abs - 1.0).abs() < tol);
        assert!((var - 2.0).abs() < 5.0 / libm::sqrt(n as f64));

        cfg.noise = Noise::Zero;
        cfg.beta_true = None;
        let y = gen_response(&x, &cfg).unwrap();
        assert_eq!(y, x.predict(&cfg.truth()));
    }

    #[test]
    fn lazy_columns_match_materialized() {
        let mut a = LazyDesign::new(50, 15, 0.5, 9);
        let mut b = LazyDesign::new(50, 15, 0.5, 9);
        let x = a.materialize().unwrap();
        for j in [14, 3, 0, 11] {
            assert_eq!(b.column(j), x.column(j));
        }
    }

    #[test]
    fn truth_baselines() {
        let cfg = SimConfig::new(20, 10, 0.0, Noise::Normal, 4);
        let mut t = TestSet::new(&cfg).unwrap();
        assert!((t.error(LossKind::L1, &cfg.truth()) - 0.80).abs() < 0.02);
        let cfg = SimConfig::new(20, 10, 0.0, Noise::Laplace, 4);
        let mut t = TestSet::new(&cfg).unwrap();
        assert!((t.error(LossKind::L2, &cfg.truth()) - 2.0).abs() < 0.06);
        let x = DesignMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let th = ParameterVector::new(1.0, vec![2.0]).unwrap();
        assert_eq!(evaluate(LossKind::L2, &th, &x, &[3.0, 5.0]).unwrap(), 0.0);
    }

    #[test]
    fn replicate_is_deterministic() {
        let mut cfg = SimConfig::new(30, 40, 0.0, Noise::Normal, 7);
        cfg.n_test = 500;
        let mut spec = StudySpec::new(Solver::lasso(LossKind::L2, FitConfig::default()));
        spec.folds = 4;
        let a = replicate_study(&cfg, &spec, 1, &NoClock).unwrap();
        let b = replicate_study(&cfg, &spec, 1, &NoClock).unwrap();
        assert_eq!(a, b);
        assert!(a.rows[0].result.is_ok());
    }

    #[test]
    fn rejects_bad_rho() {
        assert!(SimConfig::new(5, 5, 1.2, Noise::Normal, 0).validate().is_err());
    }
}
