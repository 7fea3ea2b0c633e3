//! Analytic moments of the Bayesian MMSE error estimator and the true error.

mod asymptotic;
mod coefficients;
mod matrix;

pub use asymptotic::{
    asymptotic_conditional, asymptotic_limits, asymptotic_terms, asymptotic_unconditional, AsymptoticLimits,
    AsymptoticTerms,
};
pub use coefficients::{
    conditional_coefficients, unconditional_coefficients, ConditionalCoefficients, UnconditionalCoefficients,
};
pub use matrix::{
    conditional_moment_matrix, metrics_from_matrix, unconditional_moment_matrix, ClassMoments, Mixture, MomentMatrix,
    CLASS_ENTRY_NAMES, CORRELATION_CLAMP, MIXTURE_ENTRY_NAMES,
};
