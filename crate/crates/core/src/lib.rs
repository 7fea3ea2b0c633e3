//! Moments of the Bayesian MMSE error estimator for linear discriminant
//! analysis under a Gaussian model with known common covariance.
//!
//! The crate evaluates closed-form approximations of the first and second
//! moments of the estimator and of the true error, both conditionally on the
//! class means and averaged over their conjugate prior. It also provides a
//! seeded Monte Carlo oracle for validation and a planner that finds the
//! minimum sample size guaranteeing a target RMS.

pub mod error;
pub mod gauss;
pub mod mc;
pub mod model;
pub mod moments;
pub mod planner;

pub use error::{Error, Result};
pub use gauss::{bivariate_normal_cdf, std_normal_cdf, Correlation};
pub use mc::{anderson_w, bayes_estimate, true_error, ErrorPair, Estimate, McConfig, McEstimates, Sampler};
pub use model::{
    reduce_conditional, reduce_unconditional, AsymptoticProfile, CholeskyFactor, FullModelSpec, Mode, ModelDocument,
    ReducedConditional, ReducedDocument, ReducedUnconditional,
};
pub use moments::{
    asymptotic_conditional, asymptotic_limits, asymptotic_unconditional, conditional_coefficients,
    conditional_moment_matrix, metrics_from_matrix, unconditional_coefficients, unconditional_moment_matrix,
    ClassMoments, ConditionalCoefficients, Mixture, MomentMatrix, UnconditionalCoefficients,
};
pub use planner::{kappa, min_n, plan_grid, PlanCell, PlanQuery, PlanResult, ScanRule};
