//! Location and covariance coefficients of the discriminant statistic.
//!
//! Class-0 expressions are written out once. Class-1 entries are the class-0
//! expressions evaluated on the class-swapped input, with location terms
//! negated so that class 1 errs when the statistic exceeds the threshold.

use serde::{Deserialize, Serialize};

use crate::model::{ReducedConditional, ReducedUnconditional};

/// Coefficients driving the conditional (fixed true means) moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCoefficients {
    /// Location of the estimator's statistic, `[G_0^B, G_1^B]`.
    pub g_est: [f64; 2],
    /// `δ² + p/n0 + p/n1`, the variance paired with `g_est` in the simple approximation.
    pub d_plain: f64,
    /// Location of the true error's statistic, `[G_0, G_1]`.
    pub g_true: [f64; 2],
    /// Variance terms for the estimator.
    pub d_est: [f64; 2],
    /// Variance terms for the true error.
    pub d_true: [f64; 2],
    /// Covariance between two estimator replicates of the same class.
    pub c_est: [f64; 2],
    /// Covariance between estimator replicates of class 0 and class 1.
    pub c_est_01: f64,
    /// Covariance between the estimator and true error of the same class.
    pub c_cross: [f64; 2],
    /// Estimator class 0 with true error class 1.
    pub c_cross_01: f64,
    /// Estimator class 1 with true error class 0.
    pub c_cross_10: f64,
    /// Covariance between two true-error replicates of the same class.
    pub c_true: [f64; 2],
    /// True error class 0 with true error class 1.
    pub c_true_01: f64,
}

/// Coefficients driving the unconditional (prior-averaged) moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnconditionalCoefficients {
    /// Location `[H_0, H_1]`, shared by the estimator and the true error.
    pub h: [f64; 2],
    /// Variance `[F_0, F_1]`.
    pub f: [f64; 2],
    pub k_est: [f64; 2],
    pub k_est_01: f64,
    pub k_cross: [f64; 2],
    pub k_cross_01: f64,
    pub k_cross_10: f64,
    pub k_true: [f64; 2],
    pub k_true_01: f64,
}

struct ConditionalClass0 {
    g_est: f64,
    d_est: f64,
    c_est: f64,
    g_true: f64,
    d_true: f64,
    c_cross: f64,
    c_cross_01: f64,
    c_true: f64,
}

fn conditional_class0(rc: &ReducedConditional) -> ConditionalClass0 {
    let p = f64::from(rc.p);
    let n0 = f64::from(rc.n0);
    let n1 = f64::from(rc.n1);
    let b0 = rc.beta0;
    let d2 = rc.delta2;
    let e00 = rc.eta_m0_mu0;
    let e01 = rc.eta_m0_mu1;
    let q1 = rc.eta_m0mu0_mu0mu1;
    let b0p = 1.0 + b0;

    let g_est = (b0 * (e01 - e00) + d2 + (1.0 - b0) * p / n0 + b0p * p / n1) / (2.0 * b0p);

    let prior_shift = b0 / (b0p * b0p) * ((e01 - (1.0 - b0) * e00 - d2) / n0 + (b0p * e01 - e00) / n1);
    let shared =
        (1.0 - b0) * (1.0 - b0) * p / (2.0 * n0 * n0 * b0p * b0p) + p / (n0 * n1 * b0p * b0p) + p / (2.0 * n1 * n1);

    let d_est = d2
        + d2 / (n0 * b0p)
        + d2 / (n1 * b0p)
        + d2 / (n0 * b0p * b0p)
        + prior_shift
        + p / n0
        + p / n1
        + p / (n0 * n0 * b0p)
        + p / (n0 * n1 * b0p)
        + shared;

    let c_est = prior_shift + shared + d2 / (n1 * b0p) + d2 / (n0 * b0p * b0p);

    let g_true = 0.5 * (d2 + p / n1 - p / n0);
    let d_true = d2 + d2 / n1 + p * (1.0 / n0 + 1.0 / n1 + 1.0 / (2.0 * n0 * n0) + 1.0 / (2.0 * n1 * n1));

    let c_cross = (d2 + b0 * d2 + b0 * q1) / (n1 * b0p) - (1.0 - b0) * p / (2.0 * n0 * n0 * b0p) + p / (2.0 * n1 * n1);
    let c_cross_01 = (d2 + b0 * q1) / (n0 * b0p) + (1.0 - b0) * p / (2.0 * n0 * n0 * b0p) - p / (2.0 * n1 * n1);
    let c_true = d2 / n1 + p / (2.0 * n0 * n0) + p / (2.0 * n1 * n1);

    ConditionalClass0 { g_est, d_est, c_est, g_true, d_true, c_cross, c_cross_01, c_true }
}

fn conditional_pair_est(rc: &ReducedConditional) -> f64 {
    let p = f64::from(rc.p);
    let n0 = f64::from(rc.n0);
    let n1 = f64::from(rc.n1);
    let (b0, b1) = (rc.beta0, rc.beta1);
    let d2 = rc.delta2;
    let q1 = rc.eta_m0mu0_mu0mu1;
    let q2 = rc.eta_m0mu0_m1mu0;
    let q3 = rc.eta_m1mu1_m0mu1;
    let q4 = rc.eta_m1mu1_mu1mu0;
    let k = (1.0 + b0) * (1.0 + b1);

    (b0 * q1 - b0 * b1 * q2 + b1 * q4 + b1 * d2 + d2) / (n0 * k)
        + (b1 * q4 - b0 * b1 * q3 + b0 * q1 + b0 * d2 + d2) / (n1 * k)
        + p / (n0 * n1 * k)
        + (1.0 - b0) * p / (2.0 * n0 * n0 * (1.0 + b0))
        + (1.0 - b1) * p / (2.0 * n1 * n1 * (1.0 + b1))
}

/// Evaluate every conditional coefficient.
pub fn conditional_coefficients(rc: &ReducedConditional) -> ConditionalCoefficients {
    let c0 = conditional_class0(rc);
    let c1 = conditional_class0(&rc.swap_classes());
    let p = f64::from(rc.p);
    let n0 = f64::from(rc.n0);
    let n1 = f64::from(rc.n1);

    ConditionalCoefficients {
        g_est: [c0.g_est, -c1.g_est],
        d_plain: rc.delta2 + p / n0 + p / n1,
        g_true: [c0.g_true, -c1.g_true],
        d_est: [c0.d_est, c1.d_est],
        d_true: [c0.d_true, c1.d_true],
        c_est: [c0.c_est, c1.c_est],
        c_est_01: conditional_pair_est(rc),
        c_cross: [c0.c_cross, c1.c_cross],
        c_cross_01: c0.c_cross_01,
        c_cross_10: c1.c_cross_01,
        c_true: [c0.c_true, c1.c_true],
        c_true_01: -p / (2.0 * n0 * n0) - p / (2.0 * n1 * n1),
    }
}

struct UnconditionalClass0 {
    h: f64,
    f: f64,
    k_est: f64,
    k_cross: f64,
    k_true: f64,
}

fn unconditional_class0(ru: &ReducedUnconditional) -> UnconditionalClass0 {
    let p = f64::from(ru.p);
    let n0 = f64::from(ru.n0);
    let n1 = f64::from(ru.n1);
    let (v0, v1) = (ru.nu0, ru.nu1);
    let dd = ru.prior_delta2;
    let b0p = 1.0 + v0 / n0;
    let b0p2 = b0p * b0p;

    let h = 0.5 * (dd + p / n1 - p / n0 + p / v0 + p / v1);

    let f = (1.0 + 1.0 / v0 + 1.0 / v1 + 1.0 / n1) * dd
        + p * (1.0 / n0 + 1.0 / n1 + 1.0 / v0 + 1.0 / v1)
        + p * (1.0 / (2.0 * n0 * n0) + 1.0 / (2.0 * n1 * n1) + 1.0 / (2.0 * v0 * v0) + 1.0 / (2.0 * v1 * v1))
        + p * (1.0 / (n1 * v0) + 1.0 / (n1 * v1) + 1.0 / (v0 * v1));

    let k_est =
        (1.0 / (n0 * b0p2) + 1.0 / n1 + 1.0 / (v0 * b0p2) + 1.0 / v1) * dd + p / (2.0 * n0 * n0) + p / (2.0 * v0 * v0)
            - p / (n0 * v0)
            + p / (n1 * v1)
            + p / (2.0 * n1 * n1)
            + p / (2.0 * v1 * v1)
            + p / (n0 * n1 * b0p2)
            + p / (n0 * v1 * b0p2)
            + p / (n1 * v0 * b0p2);

    let k_cross = (n0 / (v0 * (n0 + v0)) + 1.0 / n1 + 1.0 / v1) * dd
        + p / (2.0 * n1 * n1)
        + p / (2.0 * v1 * v1)
        + p / (n1 * v1)
        + n0 * p / (n1 * v0 * (n0 + v0))
        - (n0 - v0) * p / (2.0 * n0 * n0 * (n0 + v0))
        + (n0 - v0) * p / (2.0 * v0 * v0 * (n0 + v0))
        + n0 * p / (v0 * v1 * (n0 + v0));

    let k_true = (1.0 / v0 + 1.0 / v1 + 1.0 / n1) * dd
        + p / (2.0 * v0 * v0)
        + p / (2.0 * v1 * v1)
        + p / (v0 * v1)
        + p / (2.0 * n0 * n0)
        + p / (2.0 * n1 * n1)
        + p / (n1 * v0)
        + p / (n1 * v1);

    UnconditionalClass0 { h, f, k_est, k_cross, k_true }
}

fn unconditional_pair_est(ru: &ReducedUnconditional) -> f64 {
    let p = f64::from(ru.p);
    let n0 = f64::from(ru.n0);
    let n1 = f64::from(ru.n1);
    let (v0, v1) = (ru.nu0, ru.nu1);
    let (s0, s1) = (n0 + v0, n1 + v1);

    p / (s0 * s1)
        + (n0 - v0) * p / (2.0 * n0 * n0 * s0)
        + (n1 - v1) * p / (2.0 * n1 * n1 * s1)
        + n0 * n1 * p / (v0 * v1 * s0 * s1)
        + (n0 - v0) * p / (2.0 * v0 * v0 * s0)
        + (n1 - v1) * p / (2.0 * v1 * v1 * s1)
        + (1.0 + n0 / s1 - v0 / n0) * p / (v0 * s0)
        + (1.0 + n1 / s0 - v1 / n1) * p / (v1 * s1)
        + (1.0 / v0 + 1.0 / v1) * ru.prior_delta2
}

fn unconditional_pair_true(ru: &ReducedUnconditional) -> f64 {
    let p = f64::from(ru.p);
    let n0 = f64::from(ru.n0);
    let n1 = f64::from(ru.n1);
    let (v0, v1) = (ru.nu0, ru.nu1);
    (1.0 / v0 + 1.0 / v1) * ru.prior_delta2 + p / (2.0 * v0 * v0) + p / (2.0 * v1 * v1) + p / (v0 * v1)
        - p / (2.0 * n0 * n0)
        - p / (2.0 * n1 * n1)
}

/// Evaluate every unconditional coefficient.
pub fn unconditional_coefficients(ru: &ReducedUnconditional) -> UnconditionalCoefficients {
    let u0 = unconditional_class0(ru);
    let u1 = unconditional_class0(&ru.swap_classes());
    let pair_true = unconditional_pair_true(ru);
    UnconditionalCoefficients {
        h: [u0.h, -u1.h],
        f: [u0.f, u1.f],
        k_est: [u0.k_est, u1.k_est],
        k_est_01: unconditional_pair_est(ru),
        k_cross: [u0.k_cross, u1.k_cross],
        k_cross_01: pair_true,
        k_cross_10: unconditional_pair_true(&ru.swap_classes()),
        k_true: [u0.k_true, u1.k_true],
        k_true_01: pair_true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn worked_conditional() -> ReducedConditional {
        ReducedConditional::centered(4, 20, 1.0, 4.0, 0.0).unwrap()
    }

    #[test]
    fn conditional_hand_values() {
        let cc = conditional_coefficients(&worked_conditional());
        assert_abs_diff_eq!(cc.g_est[0], 2.1, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.g_est[1], -2.1, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.d_plain, 4.4, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.d_est[0], 4.7675, epsilon = 1e-13);
        assert_abs_diff_eq!(cc.c_est[0], 0.2575, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.g_true[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.d_true[0], 4.61, epsilon = 1e-13);
        assert_abs_diff_eq!(cc.c_true[0], 0.21, epsilon = 1e-14);
        assert_abs_diff_eq!(cc.c_true[0], cc.d_true[0] - cc.d_plain, epsilon = 1e-13);
        assert_abs_diff_eq!(cc.c_true_01, -0.01, epsilon = 1e-15);
    }

    #[test]
    fn unconditional_hand_values() {
        let ru = ReducedUnconditional { p: 4, n0: 20, n1: 20, nu0: 20.0, nu1: 20.0, c: 0.0, prior_delta2: 4.0 };
        let uc = unconditional_coefficients(&ru);
        assert_abs_diff_eq!(uc.h[0], 2.2, epsilon = 1e-14);
        assert_abs_diff_eq!(uc.h[1], -2.2, epsilon = 1e-14);
        assert_abs_diff_eq!(uc.f[0], 5.45, epsilon = 1e-13);
        assert_eq!(uc.k_cross_01, uc.k_true_01);
    }

    #[test]
    fn class_one_mirrors_class_zero_under_swap() {
        let mut rc = worked_conditional();
        rc.n1 = 35;
        rc.beta1 = 0.4;
        rc.c = 0.7;
        rc.eta_m0mu0_mu0mu1 = 0.3;
        rc.eta_m1mu1_mu1mu0 = -0.2;
        let a = conditional_coefficients(&rc);
        let b = conditional_coefficients(&rc.swap_classes());
        assert_eq!(a.g_est[0], -b.g_est[1]);
        assert_eq!(a.d_est, [b.d_est[1], b.d_est[0]]);
        assert_eq!(a.c_cross_01, b.c_cross_10);
        assert_abs_diff_eq!(a.c_est_01, b.c_est_01, epsilon = 1e-15);
    }
}
