mod common;

use common::*;
use lassocd_core::l2::{fit_l2, update_beta_k_l2, update_mu_l2};
use lassocd_core::*;
use rand::Rng;

fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
    let steps = ((hi - lo) / step).round() as usize;
    (0..=steps)
        .map(|i| lo + i as f64 * step)
        .fold((f64::INFINITY, lo), |best, b| if f(b) < best.0 { (f(b), b) } else { best })
        .1
}

#[test]
fn intercept_update_is_mean() {
    let x = DesignMatrix::from_rows(&[[0.5], [-0.5]]).unwrap();
    let y = [1.0, 3.0];
    let pr = Problem::new(&x, &y).unwrap();
    let mut th = ParameterVector::zeros(1);
    let mut s = ResidualState::from_scratch(&x, &y, &th);
    assert_eq!(update_mu_l2(&pr, &mut s, &mut th), 2.0);
    assert_eq!(update_mu_l2(&pr, &mut s, &mut th), 2.0);
}

#[test]
fn intercept_update_matches_direct_mean() {
    let mut g = rng(30);
    let (x, y) = instance(&mut g, 30, 4);
    let pr = Problem::new(&x, &y).unwrap();
    let mut th = ParameterVector::new(0.7, (0..4).map(|_| g.random_range(-1.0..1.0)).collect()).unwrap();
    let mut s = ResidualState::from_scratch(&x, &y, &th);
    let direct = (0..30)
        .map(|i| y[i] - (0..4).map(|k| x.get(i, k) * th.beta[k]).sum::<f64>())
        .sum::<f64>()
        / 30.0;
    let before = l2_objective(&x, &y, &th, 0.0);
    let mu = update_mu_l2(&pr, &mut s, &mut th);
    assert!((mu - direct).abs() < 1e-12);
    assert!(l2_objective(&x, &y, &th, 0.0) <= before);
}

fn single_update(lambda: f64) -> f64 {
    let x = DesignMatrix::from_rows(&[[1.0], [-1.0]]).unwrap();
    let y = [1.0, -1.0];
    let pr = Problem::new(&x, &y).unwrap();
    let mut th = ParameterVector::zeros(1);
    let mut s = ResidualState::from_scratch(&x, &y, &th);
    update_beta_k_l2(&pr, &mut s, &mut th, 0, lambda, 0.0).unwrap()
}

#[test]
fn coefficient_update_examples() {
    assert_eq!(single_update(0.0), 1.0);
    let f = |b: f64| 0.5 * ((1.0 - b).powi(2) + (-1.0 + b).powi(2)) + b.abs();
    let oracle = grid_argmin(f, -5.0, 5.0, 1e-4);
    assert!((single_update(1.0) - oracle).abs() < 1e-4);
    assert_eq!(single_update(1.0), 0.5);
    assert_eq!(single_update(3.0), 0.0);
}

#[test]
fn zero_column_cannot_be_updated() {
    let x = DesignMatrix::from_rows(&[[0.0], [0.0]]).unwrap();
    let y = [1.0, 2.0];
    let pr = Problem::new(&x, &y).unwrap();
    let mut th = ParameterVector::zeros(1);
    let mut s = ResidualState::from_scratch(&x, &y, &th);
    assert!(update_beta_k_l2(&pr, &mut s, &mut th, 0, 0.0, 0.0).is_err());
}

fn both(problem: &Problem<'_>, lambda: f64) -> [FitResult; 2] {
    [Strategy::Cyclic, Strategy::Greedy].map(|s| fit_l2(problem, lambda, &FitConfig::default().with_strategy(s).with_trace(), None).unwrap())
}

#[test]
fn large_lambda_gives_intercept_only() {
    let mut g = rng(31);
    let (x, y) = instance(&mut g, 20, 6);
    let ybar = y.iter().sum::<f64>() / 20.0;
    let lmax = (0..6)
        .map(|k| (0..20).map(|i| (y[i] - ybar) * x.get(i, k)).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let pr = Problem::new(&x, &y).unwrap();
    for fit in both(&pr, lmax * 1.01) {
        assert!(fit.converged);
        assert!(fit.theta.beta.iter().all(|&b| b == 0.0));
        assert!((fit.theta.mu - ybar).abs() < 1e-12);
    }
}

#[test]
fn orthogonal_design_soft_thresholds() {
    // centered, mutually orthogonal columns
    let x = DesignMatrix::from_columns(vec![vec![1.0, -1.0, 0.0, 0.0, 0.0], vec![1.0, 1.0, -2.0, 0.0, 0.0]]).unwrap();
    let y = [2.0, 0.5, -1.0, 0.3, 0.7];
    let lambda = 0.5;
    let ybar = y.iter().sum::<f64>() / 5.0;
    let pr = Problem::new(&x, &y).unwrap();
    for fit in both(&pr, lambda) {
        for k in 0..2 {
            let col = x.column(k);
            let ss: f64 = col.iter().map(|v| v * v).sum();
            let ols: f64 = col.iter().zip(&y).map(|(v, yi)| v * (yi - ybar)).sum::<f64>() / ss;
            let closed = ols.signum() * (ols.abs() - lambda / ss).max(0.0);
            let grid = grid_argmin(|b| 0.5 * ss * (b - ols).powi(2) + lambda * b.abs(), -5.0, 5.0, 1e-4);
            assert!((fit.theta.beta[k] - closed).abs() < 1e-8);
            assert!((fit.theta.beta[k] - grid).abs() < 1e-4);
        }
        assert!((fit.theta.mu - ybar).abs() < 1e-10);
    }
}

#[test]
fn solvers_reach_the_exact_minimum_on_small_problems() {
    let mut g = rng(32);
    for _ in 0..30 {
        let n = g.random_range(5..=12);
        let p = g.random_range(1..=4);
        let (x, y) = instance(&mut g, n, p);
        let lambda = g.random_range(0.0..4.0);
        let best = l2_lasso_oracle(&x, &y, lambda);
        let pr = Problem::new(&x, &y).unwrap();
        for fit in both(&pr, lambda) {
            assert!(fit.converged);
            assert!((fit.objective - best).abs() <= 1e-8 * best.abs().max(1.0), "{} vs {best}", fit.objective);
            assert!(non_increasing(fit.trace.as_ref().unwrap()));
            assert!(lasso_kkt_violation(&x, &y, &fit.theta, lambda) <= tol_kkt(lambda));
        }
    }
}

#[test]
fn strategies_agree_and_warm_starts_match_cold() {
    let mut g = rng(33);
    for _ in 0..10 {
        let (x, y) = instance(&mut g, 40, 60);
        let pr = Problem::new(&x, &y).unwrap();
        let lambda = g.random_range(2.0..15.0);
        let [c, gr] = both(&pr, lambda);
        assert!(c.converged && gr.converged);
        assert!((c.objective - gr.objective).abs() <= 1e-7 * c.objective);
        let warm = fit_l2(&pr, lambda * 0.8, &FitConfig::default(), Some(&c.theta)).unwrap();
        let cold = fit_l2(&pr, lambda * 0.8, &FitConfig::default(), None).unwrap();
        assert!((warm.objective - cold.objective).abs() <= 1e-7 * cold.objective);
    }
}

#[test]
fn greedy_steps_meet_the_descent_certificate() {
    let mut g = rng(34);
    let (x, y) = instance(&mut g, 30, 10);
    let pr = Problem::new(&x, &y).unwrap();
    let cfg = FitConfig {
        certify_descent: true,
        ..FitConfig::default().with_strategy(Strategy::Greedy)
    };
    let fit = fit_l2(&pr, 3.0, &cfg, None).unwrap();
    assert!(fit.converged);
    assert_eq!(fit.certificate_violations, 0);
}

#[test]
fn zero_columns_are_skipped() {
    let x = DesignMatrix::from_columns(vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0; 4]]).unwrap();
    let y = [1.0, 2.1, 2.9, 4.2];
    let pr = Problem::new(&x, &y).unwrap();
    for fit in both(&pr, 0.0) {
        assert_eq!(fit.skipped_columns, vec![1]);
        assert_eq!(fit.theta.beta[1], 0.0);
        let o = ols(&DesignMatrix::from_columns(vec![x.column(0).to_vec()]).unwrap(), &y, &[0]);
        assert!((fit.theta.beta[0] - o.beta[0]).abs() < 1e-6);
    }
}

#[test]
fn bad_settings_are_rejected() {
    let x = DesignMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
    let y = [1.0, 2.0];
    let pr = Problem::new(&x, &y).unwrap();
    assert!(fit_l2(&pr, -1.0, &FitConfig::default(), None).is_err());
    let cfg = FitConfig {
        max_sweeps: 0,
        ..FitConfig::default()
    };
    assert!(fit_l2(&pr, 1.0, &cfg, None).is_err());
    let wrong = ParameterVector::zeros(3);
    assert!(fit_l2(&pr, 1.0, &FitConfig::default(), Some(&wrong)).is_err());
}

#[test]
fn sweep_cap_reports_unconverged() {
    let mut g = rng(35);
    let (x, y) = instance(&mut g, 30, 20);
    let pr = Problem::new(&x, &y).unwrap();
    let cfg = FitConfig {
        max_sweeps: 1,
        ..FitConfig::default()
    };
    let fit = fit_l2(&pr, 0.5, &cfg, None).unwrap();
    assert!(!fit.converged);
    assert_eq!(fit.sweeps, 1);
}
