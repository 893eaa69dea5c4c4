//! Simulation and verification of real zeros of random analytic functions.
//!
//! Four coefficient families are covered: spherical polynomials (SP), the flat
//! random analytic function (FAF), the hyperbolic random analytic function
//! (HAF) and Weyl polynomials (WP). For each of them the crate provides the
//! closed-form limiting mean density of real zeros, a numerically stable
//! evaluator for the variance-normalized random function, a sign-change zero
//! counter with an eigenvalue-based oracle, and a deterministic parallel
//! Monte Carlo driver.

pub mod ensembles;
pub mod error;
pub mod evaluate;
pub mod montecarlo;
pub mod sampling;
pub mod special;
pub mod zeros;

pub use ensembles::{EnsembleKind, IntervalSpec, PDerivatives};
pub use error::{Error, Result};
pub use evaluate::{truncation_order, LimitProcessSample, SampleFunction, DEFAULT_TAIL_EPS};
pub use montecarlo::{
    convergence_study, estimate_covariance, estimate_limit_process_zero_count,
    estimate_mean_zero_count, oracle_agreement, ConvergenceRow, CovarianceConfig,
    CovarianceEstimate, ExperimentConfig, ExperimentResult, LimitZeroEstimate, NRow,
    OracleAgreementReport, OracleCheckConfig, OracleInstance,
};
pub use sampling::{CoeffDistribution, TrialStream};
pub use zeros::{count_zeros_grid, count_zeros_oracle, GridParams, ZeroCountReport};
