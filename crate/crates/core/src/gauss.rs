//! Standard normal distribution functions in one and two dimensions.
//!
//! The bivariate CDF follows Genz's refinement of the Drezner–Wesolowsky
//! method: Gauss–Legendre quadrature of the derivative of `Φ(a, b; ρ)` with
//! respect to the correlation for `|ρ| < 0.925`, and an asymptotic expansion
//! of the complementary integral for larger `|ρ|`. Absolute accuracy is close
//! to double precision everywhere.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correlations with `|ρ|` above this are evaluated at the exact `ρ = ±1` limits.
const DEGENERATE_RHO: f64 = 1.0 - 1e-12;

/// Gauss–Legendre abscissae and weights on `[-1, 1]`, positive half only.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, 0.9324695142031522),
    (0.3607615730481384, 0.6612093864662647),
    (0.4679139345726904, 0.2386191860831970),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, 0.9815606342467191),
    (0.1069393259953183, 0.9041172563704750),
    (0.1600783285433464, 0.7699026741943050),
    (0.2031674267230659, 0.5873179542866171),
    (0.2334925365383547, 0.3678314989981802),
    (0.2491470458134029, 0.1252334085114692),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, 0.9931285991850949),
    (0.4060142980038694e-01, 0.9639719272779138),
    (0.6267204833410906e-01, 0.9122344282513259),
    (0.8327674157670475e-01, 0.8391169718222188),
    (0.1019301198172404, 0.7463319064601508),
    (0.1181945319615184, 0.6360536807265150),
    (0.1316886384491766, 0.5108670019508271),
    (0.1420961093183821, 0.3737060887154196),
    (0.1491729864726037, 0.2277858511416451),
    (0.1527533871307259, 0.7652652113349733e-01),
];

/// A correlation coefficient in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Correlation(f64);

impl Correlation {
    /// Values within `1e-9` outside `[-1, 1]` are snapped to the boundary.
    pub fn new(rho: f64) -> Result<Self> {
        if rho.is_nan() {
            return Err(Error::Numeric("correlation is NaN".into()));
        }
        let snapped = if rho > 1.0 && rho <= 1.0 + 1e-9 {
            1.0
        } else if (-1.0 - 1e-9..-1.0).contains(&rho) {
            -1.0
        } else {
            rho
        };
        if !(-1.0..=1.0).contains(&snapped) {
            return Err(Error::Numeric(format!("correlation {rho} outside [-1, 1]")));
        }
        Ok(Self(snapped))
    }

    pub const ZERO: Self = Self(0.0);

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Correlation {
    type Error = Error;

    fn try_from(rho: f64) -> Result<Self> {
        Self::new(rho)
    }
}

impl From<Correlation> for f64 {
    fn from(rho: Correlation) -> f64 {
        rho.0
    }
}

/// `Φ(x)`, the standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Numeric("std_normal_cdf of NaN".into()));
    }
    Ok(phi(x))
}

/// `Φ(x)` without the NaN check.
#[inline]
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `P(X ≤ a, Y ≤ b)` for a standard bivariate normal pair with correlation `rho`.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: Correlation) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::Numeric("bivariate_normal_cdf of NaN".into()));
    }
    // Canonical argument order makes the function exactly symmetric.
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let r = rho.get();

    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if b == f64::INFINITY {
        return Ok(phi(a));
    }
    if r > DEGENERATE_RHO {
        return Ok(phi(a).min(phi(b)));
    }
    if r < -DEGENERATE_RHO {
        return Ok((phi(a) + phi(b) - 1.0).max(0.0));
    }
    if r == 0.0 {
        return Ok(phi(a) * phi(b));
    }
    Ok(upper_orthant(-a, -b, r))
}

/// `P(X > h, Y > k)` for finite `h`, `k` and `0 < |r| < 1`.
fn upper_orthant(h: f64, k: f64, r: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };

    if r.abs() < 0.925 {
        let hk = h * k;
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        let mut sum = 0.0;
        for &(w, x) in rule {
            for node in [1.0 - x, 1.0 + x] {
                let sn = (asr * node).sin();
                sum += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (sum * asr / two_pi + phi(-h) * phi(-k)).clamp(0.0, 1.0);
    }

    // High correlation: integrate the complement of the ρ = ±1 limit.
    let k = if r < 0.0 { -k } else { k };
    let hk = h * k;
    let mut bvn = 0.0;
    let a_sq = (1.0 - r) * (1.0 + r);
    let mut a = a_sq.sqrt();
    let b_sq = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 80.0;
    let asr = -0.5 * (b_sq / a_sq + hk);
    if asr > -100.0 {
        bvn = a * asr.exp() * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq) / 3.0 + c * d * a_sq * a_sq);
    }
    if hk > -100.0 {
        let b = b_sq.sqrt();
        let sp = two_pi.sqrt() * phi(-b / a);
        bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * b_sq * (1.0 - d * b_sq) / 3.0);
    }
    a *= 0.5;
    let mut sum = 0.0;
    for &(w, x) in rule {
        for node in [1.0 - x, 1.0 + x] {
            let xs = (a * node) * (a * node);
            let asr = -0.5 * (b_sq / xs + hk);
            if asr > -100.0 {
                let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                let rs = (1.0 - xs).sqrt();
                let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                sum += w * asr.exp() * (sp - ep);
            }
        }
    }
    bvn = (a * sum - bvn) / two_pi;

    let p = if r > 0.0 {
        bvn + phi(-h.max(k))
    } else if h >= k {
        -bvn
    } else {
        let l = if h < 0.0 { phi(k) - phi(h) } else { phi(-h) - phi(-k) };
        l - bvn
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rho(r: f64) -> Correlation {
        Correlation::new(r).unwrap()
    }

    #[test]
    fn univariate_reference_values() {
        // Reference values from 50-digit evaluation of erfc.
        let cases = [
            (0.0, 0.5),
            (-1.0, 0.15865525393145705),
            (-2.0, 0.022750131948179207),
            (1.5, 0.9331927987311419),
            (-5.0, 2.866515718791939e-7),
            (-8.0, 6.22096057427178e-16),
            (3.0, 0.9986501019683699),
        ];
        for (x, want) in cases {
            assert_abs_diff_eq!(std_normal_cdf(x).unwrap(), want, epsilon = 1e-15);
        }
        assert_eq!(std_normal_cdf(f64::INFINITY).unwrap(), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        assert!(std_normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn correlation_snapping() {
        assert_eq!(Correlation::new(1.0 + 5e-10).unwrap().get(), 1.0);
        assert_eq!(Correlation::new(-1.0 - 5e-10).unwrap().get(), -1.0);
        assert!(Correlation::new(1.001).is_err());
        assert!(Correlation::new(f64::NAN).is_err());
    }

    #[test]
    fn origin_quadrant_has_closed_form() {
        for r in [-0.99, -0.95, -0.6, -0.2, 0.1, 0.5, 0.8, 0.93, 0.999] {
            let want = 0.25 + f64::asin(r) / (2.0 * PI);
            assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, rho(r)).unwrap(), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn independence_and_marginals() {
        let got = bivariate_normal_cdf(1.2, -0.3, Correlation::ZERO).unwrap();
        assert_abs_diff_eq!(got, phi(1.2) * phi(-0.3), epsilon = 1e-15);
        for r in [-0.9, 0.0, 0.4, 0.97] {
            let got = bivariate_normal_cdf(0.7, f64::INFINITY, rho(r)).unwrap();
            assert_abs_diff_eq!(got, phi(0.7), epsilon = 1e-15);
            assert_eq!(bivariate_normal_cdf(f64::NEG_INFINITY, 0.3, rho(r)).unwrap(), 0.0);
        }
    }

    #[test]
    fn degenerate_correlations() {
        let (a, b) = (0.4, -0.2);
        assert_abs_diff_eq!(bivariate_normal_cdf(a, b, rho(1.0)).unwrap(), phi(b), epsilon = 1e-15);
        assert_abs_diff_eq!(bivariate_normal_cdf(a, b, rho(-1.0)).unwrap(), phi(a) + phi(b) - 1.0, epsilon = 1e-15);
        assert_eq!(bivariate_normal_cdf(-1.0, -1.0, rho(-1.0)).unwrap(), 0.0);
        // Continuity into the limit.
        let near = bivariate_normal_cdf(a, b, rho(1.0 - 1e-10)).unwrap();
        assert_abs_diff_eq!(near, phi(b), epsilon = 1e-5);
    }

    #[test]
    fn reflection_identity() {
        for &(a, b, r) in &[(0.3, 1.1, 0.5), (-2.0, 0.7, -0.95), (1.5, -1.5, 0.96), (-0.4, -3.0, 0.2)] {
            let lhs = bivariate_normal_cdf(a, b, rho(r)).unwrap();
            let rhs = phi(a) - bivariate_normal_cdf(a, -b, rho(-r)).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
        }
    }

    #[test]
    fn nan_is_rejected() {
        assert!(bivariate_normal_cdf(f64::NAN, 0.0, Correlation::ZERO).is_err());
        assert!(bivariate_normal_cdf(0.0, f64::NAN, Correlation::ZERO).is_err());
    }
}
