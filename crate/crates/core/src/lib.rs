//! Coordinate descent solvers for lasso-penalized l1 and l2 regression.
//!
//! The crate is `no_std` and only needs `alloc`. It covers:
//!
//! - [`l2`]: cyclic and greedy coordinate descent for least squares
//! - [`l1`]: Edgeworth's weighted-median coordinate descent for least
//!   absolute deviation, greedy or cyclic
//! - [`group`]: mixed group-norm penalties handled by majorizing the norm
//! - [`tuning`]: k-fold cross-validation, geometric bracketing, golden
//!   section search and unpenalized re-estimation of the active set
//! - [`simgen`]: correlated Gaussian designs and replicated simulation
//!   studies
//!
//! File formats, the command line front end and wall-clock timing live in
//! the companion `lassocd` crate.

#![no_std]

extern crate alloc;

pub mod error;
pub mod group;
pub mod l1;
pub mod l2;
pub mod model;
pub mod objective;
pub mod residual;
pub mod simgen;
pub mod standardize;
pub mod tuning;

pub use error::{Error, Result};
pub use l2::{FitConfig, Strategy};
pub use model::{
    tol_kkt, Coord, DesignMatrix, Direction, FitResult, GroupStructure, LossKind,
    ParameterVector, PenaltySpec, Problem,
};
pub use objective::{column_bound_b, dir_deriv, objective, steepest_descent_score, Steepest};
pub use residual::ResidualState;
