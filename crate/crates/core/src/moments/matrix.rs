//! Moment matrices of the estimator and the true error, and the mixture metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{bivariate_normal_cdf, phi, Correlation};
use crate::model::{ReducedConditional, ReducedUnconditional};

use super::coefficients::{conditional_coefficients, unconditional_coefficients};

/// Largest correlation magnitude passed to the bivariate CDF.
pub const CORRELATION_CLAMP: f64 = 0.999_999;

/// A negative deviation variance beyond this is reported as inconsistent.
const DEV_VAR_TOLERANCE: f64 = 1e-10;

/// Per-class moments of the estimator `ε̂_i` and the true error `ε_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMoments<T> {
    /// `E[ε̂_i]`
    pub est_first: [T; 2],
    /// `E[ε_i]`
    pub true_first: [T; 2],
    /// `E[ε̂_i ε̂_j]`
    pub est_second: [[T; 2]; 2],
    /// `E[ε_i ε_j]`
    pub true_second: [[T; 2]; 2],
    /// `E[ε̂_i ε_j]`
    pub cross: [[T; 2]; 2],
}

/// Moments of the prior-weighted mixtures `ε̂ = α0 ε̂_0 + α1 ε̂_1`, `ε = α0 ε_0 + α1 ε_1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mixture<T> {
    pub est_mean: T,
    pub true_mean: T,
    pub est_sq: T,
    pub true_sq: T,
    pub cross: T,
    pub bias: T,
    pub dev_var: T,
    pub rms: T,
}

/// Names of the per-class entries, in [`ClassMoments::values`] order.
pub const CLASS_ENTRY_NAMES: [&str; 14] = [
    "eb0", "eb1", "e0", "e1", "eb0_sq", "eb1_sq", "eb0_eb1", "e0_sq", "e1_sq", "e0_e1", "eb0_e0", "eb0_e1", "eb1_e0",
    "eb1_e1",
];

/// Names of the mixture entries, in [`Mixture::values`] order.
pub const MIXTURE_ENTRY_NAMES: [&str; 8] = ["eb", "e", "eb_sq", "e_sq", "eb_e", "bias", "dev_var", "rms"];

impl<T: Copy> ClassMoments<T> {
    pub fn values(&self) -> [T; 14] {
        [
            self.est_first[0],
            self.est_first[1],
            self.true_first[0],
            self.true_first[1],
            self.est_second[0][0],
            self.est_second[1][1],
            self.est_second[0][1],
            self.true_second[0][0],
            self.true_second[1][1],
            self.true_second[0][1],
            self.cross[0][0],
            self.cross[0][1],
            self.cross[1][0],
            self.cross[1][1],
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, T)> {
        CLASS_ENTRY_NAMES.into_iter().zip(self.values())
    }

    /// Exchange the class labels.
    pub fn relabeled(&self) -> Self {
        let sw = |m: [[T; 2]; 2]| [[m[1][1], m[1][0]], [m[0][1], m[0][0]]];
        Self {
            est_first: [self.est_first[1], self.est_first[0]],
            true_first: [self.true_first[1], self.true_first[0]],
            est_second: sw(self.est_second),
            true_second: sw(self.true_second),
            cross: sw(self.cross),
        }
    }
}

impl<T: Copy> Mixture<T> {
    pub fn values(&self) -> [T; 8] {
        [self.est_mean, self.true_mean, self.est_sq, self.true_sq, self.cross, self.bias, self.dev_var, self.rms]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, T)> {
        MIXTURE_ENTRY_NAMES.into_iter().zip(self.values())
    }
}

/// Analytic moments with mixture metrics and correlation-clamp diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix {
    pub alpha0: f64,
    pub class: ClassMoments<f64>,
    pub mixture: Mixture<f64>,
    /// Entries whose correlation ratio was clamped to `±CORRELATION_CLAMP`.
    pub clamped: Vec<String>,
}

impl MomentMatrix {
    /// Assemble from per-class moments, computing the mixture metrics.
    pub fn from_class(class: ClassMoments<f64>, alpha0: f64, clamped: Vec<String>) -> Result<Self> {
        let mixture = metrics_from_matrix(&class, alpha0)?;
        Ok(Self { alpha0, class, mixture, clamped })
    }

    /// All entries by name, per-class first.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        self.class.named().chain(self.mixture.named()).collect()
    }
}

/// Mixture moments and the bias, deviation variance and RMS of `ε̂` against `ε`.
pub fn metrics_from_matrix(class: &ClassMoments<f64>, alpha0: f64) -> Result<Mixture<f64>> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::Model(format!("alpha0 = {alpha0} outside (0, 1)")));
    }
    let a = [alpha0, 1.0 - alpha0];
    let mean = |v: [f64; 2]| a[0] * v[0] + a[1] * v[1];
    let quad = |m: [[f64; 2]; 2]| {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += a[i] * a[j] * m[i][j];
            }
        }
        s
    };
    let est_mean = mean(class.est_first);
    let true_mean = mean(class.true_first);
    let est_sq = quad(class.est_second);
    let true_sq = quad(class.true_second);
    let cross = quad(class.cross);
    let bias = est_mean - true_mean;
    let mut dev_var =
        (est_sq - est_mean * est_mean) + (true_sq - true_mean * true_mean) - 2.0 * (cross - est_mean * true_mean);
    if dev_var < -DEV_VAR_TOLERANCE {
        return Err(Error::Inconsistent(format!("deviation variance {dev_var:e} is negative")));
    }
    dev_var = dev_var.max(0.0);
    let rms = (bias * bias + dev_var).sqrt();
    Ok(Mixture { est_mean, true_mean, est_sq, true_sq, cross, bias, dev_var, rms })
}

/// Bivariate normal orthant evaluator that clamps and logs correlation ratios.
struct Orthant {
    clamped: Vec<String>,
}

impl Orthant {
    fn new() -> Self {
        Self { clamped: Vec::new() }
    }

    fn eval(&mut self, entry: &str, a: f64, b: f64, cov: f64, var_a: f64, var_b: f64) -> Result<f64> {
        let ratio = cov / (var_a * var_b).sqrt();
        if ratio.is_nan() {
            return Err(Error::Numeric(format!("{entry}: correlation ratio is NaN")));
        }
        let rho = if ratio.abs() > CORRELATION_CLAMP {
            self.clamped.push(entry.to_string());
            ratio.signum() * CORRELATION_CLAMP
        } else {
            ratio
        };
        bivariate_normal_cdf(a, b, Correlation::new(rho)?)
    }
}

fn positive_variance(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{name} = {v} is not a positive variance")))
    }
}

/// Moments conditional on the true class means.
pub fn conditional_moment_matrix(rc: &ReducedConditional) -> Result<MomentMatrix> {
    let rc = rc.validated()?;
    let cc = conditional_coefficients(&rc);
    for (name, v) in
        [("D_est_0", cc.d_est[0]), ("D_est_1", cc.d_est[1]), ("D_true_0", cc.d_true[0]), ("D_true_1", cc.d_true[1])]
    {
        positive_variance(name, v)?;
    }
    let c = rc.c;
    let a = [(-cc.g_est[0] + c) / cc.d_est[0].sqrt(), (cc.g_est[1] - c) / cc.d_est[1].sqrt()];
    let t = [(-cc.g_true[0] + c) / cc.d_true[0].sqrt(), (cc.g_true[1] - c) / cc.d_true[1].sqrt()];
    let (de, dt) = (cc.d_est, cc.d_true);
    let mut o = Orthant::new();

    let e00 = o.eval("eb0_sq", a[0], a[0], cc.c_est[0], de[0], de[0])?;
    let e11 = o.eval("eb1_sq", a[1], a[1], cc.c_est[1], de[1], de[1])?;
    let e01 = o.eval("eb0_eb1", a[0], a[1], cc.c_est_01, de[0], de[1])?;
    let t00 = o.eval("e0_sq", t[0], t[0], cc.c_true[0], dt[0], dt[0])?;
    let t11 = o.eval("e1_sq", t[1], t[1], cc.c_true[1], dt[1], dt[1])?;
    let t01 = o.eval("e0_e1", t[0], t[1], cc.c_true_01, dt[0], dt[1])?;
    let x00 = o.eval("eb0_e0", a[0], t[0], cc.c_cross[0], de[0], dt[0])?;
    let x01 = o.eval("eb0_e1", a[0], t[1], cc.c_cross_01, de[0], dt[1])?;
    let x10 = o.eval("eb1_e0", a[1], t[0], cc.c_cross_10, de[1], dt[0])?;
    let x11 = o.eval("eb1_e1", a[1], t[1], cc.c_cross[1], de[1], dt[1])?;

    let class = ClassMoments {
        est_first: [phi(a[0]), phi(a[1])],
        true_first: [phi(t[0]), phi(t[1])],
        est_second: [[e00, e01], [e01, e11]],
        true_second: [[t00, t01], [t01, t11]],
        cross: [[x00, x01], [x10, x11]],
    };
    MomentMatrix::from_class(class, rc.alpha0(), o.clamped)
}

/// Moments averaged over the prior on the class means.
pub fn unconditional_moment_matrix(ru: &ReducedUnconditional) -> Result<MomentMatrix> {
    let ru = ru.validated()?;
    let uc = unconditional_coefficients(&ru);
    positive_variance("F_0", uc.f[0])?;
    positive_variance("F_1", uc.f[1])?;
    let c = ru.c;
    let h = [(-uc.h[0] + c) / uc.f[0].sqrt(), (uc.h[1] - c) / uc.f[1].sqrt()];
    let f = uc.f;
    let mut o = Orthant::new();

    let e00 = o.eval("eb0_sq", h[0], h[0], uc.k_est[0], f[0], f[0])?;
    let e11 = o.eval("eb1_sq", h[1], h[1], uc.k_est[1], f[1], f[1])?;
    let e01 = o.eval("eb0_eb1", h[0], h[1], uc.k_est_01, f[0], f[1])?;
    let t00 = o.eval("e0_sq", h[0], h[0], uc.k_true[0], f[0], f[0])?;
    let t11 = o.eval("e1_sq", h[1], h[1], uc.k_true[1], f[1], f[1])?;
    let t01 = o.eval("e0_e1", h[0], h[1], uc.k_true_01, f[0], f[1])?;
    let x00 = o.eval("eb0_e0", h[0], h[0], uc.k_cross[0], f[0], f[0])?;
    let x01 = o.eval("eb0_e1", h[0], h[1], uc.k_cross_01, f[0], f[1])?;
    let x10 = o.eval("eb1_e0", h[1], h[0], uc.k_cross_10, f[1], f[0])?;
    let x11 = o.eval("eb1_e1", h[1], h[1], uc.k_cross[1], f[1], f[1])?;

    let first = [phi(h[0]), phi(h[1])];
    let class = ClassMoments {
        est_first: first,
        true_first: first,
        est_second: [[e00, e01], [e01, e11]],
        true_second: [[t00, t01], [t01, t11]],
        cross: [[x00, x01], [x10, x11]],
    };
    MomentMatrix::from_class(class, ru.alpha0(), o.clamped)
}
