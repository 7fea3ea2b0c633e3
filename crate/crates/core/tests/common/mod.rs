//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code, clippy::excessive_precision)]

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod 7/15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Recursive adaptive Gauss–Kronrod quadrature to absolute tolerance `tol`.
///
/// A panel is also accepted once its error estimate reaches the rounding level
/// of its own value, since halving the tolerance further cannot succeed.
pub fn adaptive(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, err) = gk15(f, a, b);
        if err <= tol || err <= 1e-15 * k.abs() || depth >= 30 {
            return k;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(f, a, b, tol, 0)
}

/// Lower truncation of the infinite integration range; the mass beyond is below 1e-22.
const LOWER: f64 = -10.0;

/// `P(X ≤ a, Y ≤ b)` by nested adaptive quadrature of the bivariate normal density.
pub fn bvn_quadrature(a: f64, b: f64, rho: f64) -> f64 {
    let s2 = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * PI * s2.sqrt());
    let mut outer = |x: f64| {
        // Conditional form of the exponent; the expanded quadratic cancels badly as |rho| -> 1.
        let mut inner = |y: f64| {
            let d = y - rho * x;
            norm * (-0.5 * x * x - d * d / (2.0 * s2)).exp()
        };
        // Split at the conditional mean so the peak sits on a panel boundary.
        let peak = (rho * x).clamp(LOWER, b.max(LOWER));
        adaptive(&mut inner, LOWER, peak, 1e-14) + adaptive(&mut inner, peak, b.max(LOWER), 1e-14)
    };
    // The outer integrand has kinks where the split point meets either inner limit.
    let upper = a.max(LOWER);
    let mut knots = vec![LOWER, upper];
    if rho != 0.0 {
        knots.extend([b / rho, LOWER / rho].into_iter().filter(|&x| x > LOWER && x < upper));
    }
    knots.sort_by(f64::total_cmp);
    knots.windows(2).map(|w| adaptive(&mut outer, w[0], w[1], 1e-12)).sum()
}

/// `Φ(x)` by adaptive quadrature of the standard normal density.
pub fn phi_quadrature(x: f64) -> f64 {
    let mut f = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    if x <= 0.0 {
        adaptive(&mut f, LOWER.min(x - 1.0), x, 1e-15)
    } else {
        0.5 + adaptive(&mut f, 0.0, x, 1e-15)
    }
}
