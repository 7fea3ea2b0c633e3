//! Limits of the moments as `n`, `p` and `ν` grow together at fixed ratios.
//!
//! In the limit every second and cross moment factorizes into a product of
//! first moments, so the deviation variance vanishes and the RMS reduces to
//! the absolute bias.

use serde::{Deserialize, Serialize};

use crate::error::{model_err, Result};
use crate::gauss::phi;
use crate::model::AsymptoticProfile;

use super::matrix::{ClassMoments, MomentMatrix};

/// Limiting location and variance terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTerms {
    /// Estimator locations `[G_0^B, G_1^B]` with the shared variance `D`.
    pub g_est: [f64; 2],
    /// True-error locations `[G_0, G_1]`.
    pub g_true: [f64; 2],
    pub d: f64,
    /// Unconditional locations `[H_0, H_1]` and variance `F`, when `γ_i > 0`.
    pub h: Option<[f64; 2]>,
    pub f: Option<f64>,
}

pub fn asymptotic_terms(ap: &AsymptoticProfile) -> AsymptoticTerms {
    let (j0, j1) = (ap.j0, ap.j1);
    let (g0, g1) = (ap.gamma0, ap.gamma1);
    let d2 = ap.delta2_bar;
    let g_est0 = (g0 * (ap.eta_m0_mu1 - ap.eta_m0_mu0) + d2 + (1.0 - g0) * j0 + (1.0 + g0) * j1) / (2.0 * (1.0 + g0));
    let g_est1 = -(g1 * (ap.eta_m1_mu0 - ap.eta_m1_mu1) + d2 + (1.0 - g1) * j1 + (1.0 + g1) * j0) / (2.0 * (1.0 + g1));
    let (h, f) = if g0 > 0.0 && g1 > 0.0 {
        let dd = ap.prior_delta2_bar;
        let prior = j0 / g0 + j1 / g1;
        (Some([0.5 * (dd + j1 - j0 + prior), -0.5 * (dd + j0 - j1 + prior)]), Some(dd + j0 + j1 + prior))
    } else {
        (None, None)
    };
    AsymptoticTerms {
        g_est: [g_est0, g_est1],
        g_true: [0.5 * (d2 + j1 - j0), -0.5 * (d2 + j0 - j1)],
        d: d2 + j0 + j1,
        h,
        f,
    }
}

fn product_form(est: [f64; 2], truth: [f64; 2]) -> ClassMoments<f64> {
    let outer = |a: [f64; 2], b: [f64; 2]| [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]];
    ClassMoments {
        est_first: est,
        true_first: truth,
        est_second: outer(est, est),
        true_second: outer(truth, truth),
        cross: outer(est, truth),
    }
}

fn first_moments(loc: [f64; 2], var: f64, c: f64) -> [f64; 2] {
    let s = var.sqrt();
    [phi((-loc[0] + c) / s), phi((loc[1] - c) / s)]
}

/// Limiting moments conditional on the true means.
pub fn asymptotic_conditional(ap: &AsymptoticProfile) -> Result<MomentMatrix> {
    ap.validate()?;
    let t = asymptotic_terms(ap);
    if t.d.is_nan() || t.d <= 0.0 {
        return Err(model_err("limiting variance delta2_bar + J0 + J1 must be positive"));
    }
    let est = first_moments(t.g_est, t.d, ap.c);
    let truth = first_moments(t.g_true, t.d, ap.c);
    MomentMatrix::from_class(product_form(est, truth), ap.alpha0(), Vec::new())
}

/// Limiting moments averaged over the prior; requires `γ_i > 0`.
pub fn asymptotic_unconditional(ap: &AsymptoticProfile) -> Result<MomentMatrix> {
    ap.validate()?;
    if ap.gamma0.is_nan() || ap.gamma1.is_nan() || ap.gamma0 <= 0.0 || ap.gamma1 <= 0.0 {
        return Err(model_err("unconditional limits need gamma0, gamma1 > 0"));
    }
    let t = asymptotic_terms(ap);
    let (h, f) = (t.h.expect("gamma > 0"), t.f.expect("gamma > 0"));
    if f.is_nan() || f <= 0.0 {
        return Err(model_err("limiting variance F must be positive"));
    }
    let first = first_moments(h, f, ap.c);
    MomentMatrix::from_class(product_form(first, first), ap.alpha0(), Vec::new())
}

/// Both limits; the unconditional one is absent when some `γ_i = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLimits {
    pub terms: AsymptoticTerms,
    pub conditional: MomentMatrix,
    pub unconditional: Option<MomentMatrix>,
}

pub fn asymptotic_limits(ap: &AsymptoticProfile) -> Result<AsymptoticLimits> {
    let conditional = asymptotic_conditional(ap)?;
    let unconditional = if ap.gamma0 > 0.0 && ap.gamma1 > 0.0 { Some(asymptotic_unconditional(ap)?) } else { None };
    Ok(AsymptoticLimits { terms: asymptotic_terms(ap), conditional, unconditional })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(j: f64, gamma: f64) -> AsymptoticProfile {
        AsymptoticProfile {
            j0: j,
            j1: j,
            gamma0: gamma,
            gamma1: gamma,
            delta2_bar: 4.0,
            prior_delta2_bar: 4.0,
            eta_m0_mu0: 0.0,
            eta_m0_mu1: 4.0,
            eta_m1_mu0: 4.0,
            eta_m1_mu1: 0.0,
            c: 0.0,
        }
    }

    #[test]
    fn zero_complexity_recovers_bayes_error() {
        let ap = profile(0.0, 1.0);
        let t = asymptotic_terms(&ap);
        assert_abs_diff_eq!(t.g_est[0], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.d, 4.0, epsilon = 1e-15);
        let mm = asymptotic_conditional(&ap).unwrap();
        assert_abs_diff_eq!(mm.class.est_first[0], 0.15865525393145705, epsilon = 1e-15);
        assert_eq!(mm.mixture.bias, 0.0);
        assert_eq!(mm.mixture.rms, 0.0);
    }

    #[test]
    fn unconditional_terms() {
        let j = 0.3;
        let t = asymptotic_terms(&profile(j, 1.0));
        let h = t.h.unwrap();
        assert_abs_diff_eq!(h[0], 0.5 * (4.0 + 2.0 * j), epsilon = 1e-15);
        assert_abs_diff_eq!(h[1], -h[0], epsilon = 1e-15);
        assert_abs_diff_eq!(t.f.unwrap(), 4.0 + 4.0 * j, epsilon = 1e-15);
        let mm = asymptotic_unconditional(&profile(j, 1.0)).unwrap();
        assert_eq!(mm.mixture.rms, 0.0);
    }

    #[test]
    fn conditional_rms_is_absolute_bias() {
        let mut ap = profile(0.5, 0.7);
        ap.eta_m0_mu0 = 0.2;
        ap.eta_m0_mu1 = 3.1;
        ap.c = 0.4;
        let mm = asymptotic_conditional(&ap).unwrap();
        assert!(mm.mixture.bias.abs() > 1e-3);
        assert_abs_diff_eq!(mm.mixture.rms, mm.mixture.bias.abs(), epsilon = 1e-12);
    }

    #[test]
    fn zero_gamma_rejected_for_unconditional() {
        let ap = profile(0.5, 0.0);
        assert!(asymptotic_unconditional(&ap).is_err());
        let lim = asymptotic_limits(&ap).unwrap();
        assert!(lim.unconditional.is_none());
    }
}
