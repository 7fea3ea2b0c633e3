//! Model specifications and their reduction to Mahalanobis-type invariants.
//!
//! Every analytic formula depends on the vectors `μ_i`, `m_i` and `Σ` only
//! through inner products `η_{a1,a2,a3,a4} = (a1 − a2)ᵀ Σ⁻¹ (a3 − a4)`. The
//! reduced types below carry exactly those scalars, and may also be written
//! down directly without a vector model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{model_err, Error, Result};

/// Quadratic forms more negative than this are rejected rather than clamped.
const QUADRATIC_TOLERANCE: f64 = 1e-10;

/// Whether the true class means are held fixed or averaged over their prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Conditional,
    Unconditional,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Conditional => "conditional",
            Self::Unconditional => "unconditional",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(Self::Conditional),
            "unconditional" => Ok(Self::Unconditional),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Full Gaussian model with conjugate priors on the class means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullModelSpec {
    pub p: usize,
    pub mu0: Vec<f64>,
    pub mu1: Vec<f64>,
    /// Common covariance, row-major. Nested row arrays are also accepted on input.
    #[serde(deserialize_with = "de_matrix")]
    pub sigma: Vec<f64>,
    pub m0: Vec<f64>,
    pub m1: Vec<f64>,
    pub nu0: f64,
    pub nu1: f64,
    pub n0: u32,
    pub n1: u32,
    pub alpha0: f64,
}

fn de_matrix<'de, D>(deserializer: D) -> std::result::Result<Vec<f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Layout {
        Flat(Vec<f64>),
        Rows(Vec<Vec<f64>>),
    }
    Ok(match Layout::deserialize(deserializer)? {
        Layout::Flat(v) => v,
        Layout::Rows(rows) => rows.into_iter().flatten().collect(),
    })
}

/// Cholesky factor `L` of the common covariance, `Σ = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    /// Factor a row-major `p × p` matrix.
    pub fn new(p: usize, sigma: &[f64]) -> Result<Self> {
        if p == 0 {
            return Err(model_err("dimension p must be positive"));
        }
        if sigma.len() != p * p {
            return Err(model_err(format!("sigma has {} entries, expected {}", sigma.len(), p * p)));
        }
        let m = DMatrix::from_row_slice(p, p, sigma);
        let scale = m.amax().max(1.0);
        for i in 0..p {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(model_err(format!("sigma is not symmetric at ({i}, {j})")));
                }
            }
        }
        let chol = m.cholesky().ok_or_else(|| model_err("sigma is not positive definite"))?;
        Ok(Self { lower: chol.unpack() })
    }

    pub fn identity(p: usize) -> Self {
        Self { lower: DMatrix::identity(p, p) }
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `L⁻¹ v`, so that `η(a, b) = whiten(a) · whiten(b)`.
    pub fn whiten(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.check_len(v.len())?;
        let rhs = DVector::from_column_slice(v);
        self.lower.solve_lower_triangular(&rhs).ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))
    }

    /// `L z`, mapping white noise to `N(0, Σ)`.
    pub fn color(&self, z: &[f64]) -> Result<DVector<f64>> {
        self.check_len(z.len())?;
        Ok(&self.lower * DVector::from_column_slice(z))
    }

    /// `aᵀ Σ⁻¹ b`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(self.whiten(a)?.dot(&self.whiten(b)?))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(model_err(format!("vector has length {len}, expected {}", self.dim())));
        }
        Ok(())
    }
}

impl FullModelSpec {
    /// The symmetric setup with equal-element means: `Σ` has unit diagonal and
    /// constant off-diagonal `rho`, `μ0 = −μ1 = s·1` with `s` chosen so that
    /// `δ²_μ = delta2`, and `m_i = (1 + prior_offset) μ_i`.
    #[allow(clippy::too_many_arguments)]
    pub fn equal_element_means(
        p: usize,
        rho: f64,
        delta2: f64,
        prior_offset: f64,
        nu: f64,
        n0: u32,
        n1: u32,
        alpha0: f64,
    ) -> Result<Self> {
        let mut sigma = vec![rho; p * p];
        for i in 0..p {
            sigma[i * p + i] = 1.0;
        }
        let chol = CholeskyFactor::new(p, &sigma)?;
        let ones = vec![1.0; p];
        let q = chol.inner(&ones, &ones)?;
        let s = (delta2 / (4.0 * q)).sqrt();
        let mu0 = vec![s; p];
        let mu1 = vec![-s; p];
        let m0 = mu0.iter().map(|x| x * (1.0 + prior_offset)).collect();
        let m1 = mu1.iter().map(|x| x * (1.0 + prior_offset)).collect();
        let spec = Self { p, mu0, mu1, sigma, m0, m1, nu0: nu, nu1: nu, n0, n1, alpha0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(model_err("dimension p must be positive"));
        }
        for (name, v) in [("mu0", &self.mu0), ("mu1", &self.mu1), ("m0", &self.m0), ("m1", &self.m1)] {
            if v.len() != self.p {
                return Err(model_err(format!("{name} has length {}, expected p = {}", v.len(), self.p)));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(model_err(format!("{name} has non-finite entries")));
            }
        }
        if !(self.nu0 > 0.0 && self.nu0.is_finite()) {
            return Err(model_err("nu0 must be positive and finite"));
        }
        if !(self.nu1 > 0.0 && self.nu1.is_finite()) {
            return Err(model_err("nu1 must be positive and finite"));
        }
        if self.n0 == 0 || self.n1 == 0 {
            return Err(model_err("sample sizes n0, n1 must be at least 1"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 1.0) {
            return Err(model_err("alpha0 must lie strictly between 0 and 1"));
        }
        CholeskyFactor::new(self.p, &self.sigma).map(|_| ())
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        CholeskyFactor::new(self.p, &self.sigma)
    }

    /// Decision threshold `c = ln((1 − α0)/α0)`.
    pub fn threshold(&self) -> f64 {
        ((1.0 - self.alpha0) / self.alpha0).ln()
    }
}

/// The conditional (fixed `μ`) formulas' inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedConditional {
    pub p: u32,
    pub n0: u32,
    pub n1: u32,
    pub beta0: f64,
    pub beta1: f64,
    pub c: f64,
    /// `δ²_μ = η_{μ0,μ1}`.
    pub delta2: f64,
    pub eta_m0_mu0: f64,
    pub eta_m0_mu1: f64,
    pub eta_m1_mu0: f64,
    pub eta_m1_mu1: f64,
    /// `(m0 − μ0)ᵀ Σ⁻¹ (μ0 − μ1)`
    pub eta_m0mu0_mu0mu1: f64,
    /// `(m0 − μ0)ᵀ Σ⁻¹ (m1 − μ0)`
    pub eta_m0mu0_m1mu0: f64,
    /// `(m1 − μ1)ᵀ Σ⁻¹ (m0 − μ1)`
    pub eta_m1mu1_m0mu1: f64,
    /// `(m1 − μ1)ᵀ Σ⁻¹ (μ1 − μ0)`
    pub eta_m1mu1_mu1mu0: f64,
}

/// The unconditional (prior-averaged) formulas' inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedUnconditional {
    pub p: u32,
    pub n0: u32,
    pub n1: u32,
    pub nu0: f64,
    pub nu1: f64,
    pub c: f64,
    /// `Δ²_m = η_{m0,m1}`.
    #[serde(rename = "Delta2")]
    pub prior_delta2: f64,
}

/// Limits of the scalar invariants under the joint growth of `n`, `p`, `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticProfile {
    /// Limit of `p / n0`.
    #[serde(rename = "J0")]
    pub j0: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    /// Limit of `ν0 / n0`.
    pub gamma0: f64,
    pub gamma1: f64,
    pub delta2_bar: f64,
    #[serde(rename = "Delta2_bar")]
    pub prior_delta2_bar: f64,
    #[serde(default)]
    pub eta_m0_mu0: f64,
    #[serde(default)]
    pub eta_m0_mu1: f64,
    #[serde(default)]
    pub eta_m1_mu0: f64,
    #[serde(default)]
    pub eta_m1_mu1: f64,
    pub c: f64,
}

fn alpha_from_threshold(c: f64) -> f64 {
    1.0 / (1.0 + c.exp())
}

fn quadratic(name: &str, value: f64) -> Result<f64> {
    if value.is_nan() {
        return Err(model_err(format!("{name} is NaN")));
    }
    if value < -QUADRATIC_TOLERANCE {
        return Err(model_err(format!("{name} = {value} is a negative quadratic form")));
    }
    Ok(value.max(0.0))
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(model_err(format!("{name} must be positive and finite, got {value}")))
    }
}

fn finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(model_err(format!("{name} must be finite, got {value}")))
    }
}

impl ReducedConditional {
    /// Class-0 prior probability implied by the threshold.
    pub fn alpha0(&self) -> f64 {
        alpha_from_threshold(self.c)
    }

    /// Checks ranges and clamps tiny negative quadratic forms to zero.
    pub fn validated(mut self) -> Result<Self> {
        if self.p == 0 || self.n0 == 0 || self.n1 == 0 {
            return Err(model_err("p, n0 and n1 must be positive"));
        }
        positive("beta0", self.beta0)?;
        positive("beta1", self.beta1)?;
        finite("c", self.c)?;
        self.delta2 = quadratic("delta2", self.delta2)?;
        self.eta_m0_mu0 = quadratic("eta_m0_mu0", self.eta_m0_mu0)?;
        self.eta_m0_mu1 = quadratic("eta_m0_mu1", self.eta_m0_mu1)?;
        self.eta_m1_mu0 = quadratic("eta_m1_mu0", self.eta_m1_mu0)?;
        self.eta_m1_mu1 = quadratic("eta_m1_mu1", self.eta_m1_mu1)?;
        for (name, v) in [
            ("eta_m0mu0_mu0mu1", self.eta_m0mu0_mu0mu1),
            ("eta_m0mu0_m1mu0", self.eta_m0mu0_m1mu0),
            ("eta_m1mu1_m0mu1", self.eta_m1mu1_m0mu1),
            ("eta_m1mu1_mu1mu0", self.eta_m1mu1_mu1mu0),
        ] {
            finite(name, v)?;
        }
        Ok(self)
    }

    /// Relabels the classes: `n`, `β`, `m`, `μ` exchange and `c` changes sign.
    pub fn swap_classes(&self) -> Self {
        Self {
            p: self.p,
            n0: self.n1,
            n1: self.n0,
            beta0: self.beta1,
            beta1: self.beta0,
            c: -self.c,
            delta2: self.delta2,
            eta_m0_mu0: self.eta_m1_mu1,
            eta_m0_mu1: self.eta_m1_mu0,
            eta_m1_mu0: self.eta_m0_mu1,
            eta_m1_mu1: self.eta_m0_mu0,
            eta_m0mu0_mu0mu1: self.eta_m1mu1_mu1mu0,
            eta_m0mu0_m1mu0: self.eta_m1mu1_m0mu1,
            eta_m1mu1_m0mu1: self.eta_m0mu0_m1mu0,
            eta_m1mu1_mu1mu0: self.eta_m0mu0_mu0mu1,
        }
    }

    /// Priors centred on the true means (`m_i = μ_i`) with equal designs.
    /// This is the configuration used for sample-size planning.
    pub fn centered(p: u32, n_per_class: u32, beta: f64, delta2: f64, c: f64) -> Result<Self> {
        Self {
            p,
            n0: n_per_class,
            n1: n_per_class,
            beta0: beta,
            beta1: beta,
            c,
            delta2,
            eta_m0_mu0: 0.0,
            eta_m0_mu1: delta2,
            eta_m1_mu0: delta2,
            eta_m1_mu1: 0.0,
            eta_m0mu0_mu0mu1: 0.0,
            eta_m0mu0_m1mu0: 0.0,
            eta_m1mu1_m0mu1: 0.0,
            eta_m1mu1_mu1mu0: 0.0,
        }
        .validated()
    }
}

impl ReducedUnconditional {
    pub fn alpha0(&self) -> f64 {
        alpha_from_threshold(self.c)
    }

    pub fn validated(mut self) -> Result<Self> {
        if self.p == 0 || self.n0 == 0 || self.n1 == 0 {
            return Err(model_err("p, n0 and n1 must be positive"));
        }
        positive("nu0", self.nu0)?;
        positive("nu1", self.nu1)?;
        finite("c", self.c)?;
        self.prior_delta2 = quadratic("Delta2", self.prior_delta2)?;
        Ok(self)
    }

    /// Relabels the classes: `n`, `ν` exchange and `c` changes sign.
    pub fn swap_classes(&self) -> Self {
        Self {
            p: self.p,
            n0: self.n1,
            n1: self.n0,
            nu0: self.nu1,
            nu1: self.nu0,
            c: -self.c,
            prior_delta2: self.prior_delta2,
        }
    }
}

impl AsymptoticProfile {
    pub fn alpha0(&self) -> f64 {
        alpha_from_threshold(self.c)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("J0", self.j0), ("J1", self.j1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(model_err(format!("{name} must be finite and nonnegative")));
            }
        }
        for (name, v) in [("gamma0", self.gamma0), ("gamma1", self.gamma1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(model_err(format!("{name} must be finite and nonnegative")));
            }
        }
        quadratic("delta2_bar", self.delta2_bar)?;
        quadratic("Delta2_bar", self.prior_delta2_bar)?;
        finite("c", self.c)
    }
}

/// Reduce a full model to the conditional invariants.
///
/// One Cholesky factorization of `Σ` is reused for every difference vector.
pub fn reduce_conditional(spec: &FullModelSpec) -> Result<ReducedConditional> {
    spec.validate()?;
    let chol = spec.cholesky()?;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };

    let w_m0_mu0 = chol.whiten(&diff(&spec.m0, &spec.mu0))?;
    let w_m0_mu1 = chol.whiten(&diff(&spec.m0, &spec.mu1))?;
    let w_m1_mu0 = chol.whiten(&diff(&spec.m1, &spec.mu0))?;
    let w_m1_mu1 = chol.whiten(&diff(&spec.m1, &spec.mu1))?;
    let w_mu0_mu1 = chol.whiten(&diff(&spec.mu0, &spec.mu1))?;

    ReducedConditional {
        p: spec.p as u32,
        n0: spec.n0,
        n1: spec.n1,
        beta0: spec.nu0 / f64::from(spec.n0),
        beta1: spec.nu1 / f64::from(spec.n1),
        c: spec.threshold(),
        delta2: w_mu0_mu1.norm_squared(),
        eta_m0_mu0: w_m0_mu0.norm_squared(),
        eta_m0_mu1: w_m0_mu1.norm_squared(),
        eta_m1_mu0: w_m1_mu0.norm_squared(),
        eta_m1_mu1: w_m1_mu1.norm_squared(),
        eta_m0mu0_mu0mu1: w_m0_mu0.dot(&w_mu0_mu1),
        eta_m0mu0_m1mu0: w_m0_mu0.dot(&w_m1_mu0),
        eta_m1mu1_m0mu1: w_m1_mu1.dot(&w_m0_mu1),
        eta_m1mu1_mu1mu0: -w_m1_mu1.dot(&w_mu0_mu1),
    }
    .validated()
}

/// Reduce a full model to the unconditional invariants.
pub fn reduce_unconditional(spec: &FullModelSpec) -> Result<ReducedUnconditional> {
    spec.validate()?;
    let chol = spec.cholesky()?;
    let d: Vec<f64> = spec.m0.iter().zip(&spec.m1).map(|(a, b)| a - b).collect();
    let w = chol.whiten(&d)?;
    ReducedUnconditional {
        p: spec.p as u32,
        n0: spec.n0,
        n1: spec.n1,
        nu0: spec.nu0,
        nu1: spec.nu1,
        c: spec.threshold(),
        prior_delta2: w.norm_squared(),
    }
    .validated()
}

/// Either parameterization for the reduced JSON form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional: Option<ReducedConditional>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unconditional: Option<ReducedUnconditional>,
}

/// A model document: the full vector form or the reduced scalar form, with an
/// optional asymptotic profile alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ModelDocument {
    Reduced {
        reduced: ReducedDocument,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        asymptotic: Option<AsymptoticProfile>,
    },
    Full {
        #[serde(flatten)]
        spec: FullModelSpec,
    },
}

impl ModelDocument {
    /// Parse JSON. Documents with a top-level `reduced` key take the reduced
    /// form; anything else must be a complete full-model specification, and
    /// serde's message (naming the missing or unknown field and its position)
    /// is passed through.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| model_err(format!("malformed JSON: {e}")))?;
        let is_reduced = value.get("reduced").is_some();
        if is_reduced {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct Reduced {
                reduced: ReducedDocument,
                #[serde(default)]
                asymptotic: Option<AsymptoticProfile>,
            }
            let r: Reduced = serde_json::from_str(text).map_err(|e| model_err(e.to_string()))?;
            let reduced = ReducedDocument {
                conditional: r.reduced.conditional.map(ReducedConditional::validated).transpose()?,
                unconditional: r.reduced.unconditional.map(ReducedUnconditional::validated).transpose()?,
            };
            if let Some(ap) = &r.asymptotic {
                ap.validate()?;
            }
            Ok(Self::Reduced { reduced, asymptotic: r.asymptotic })
        } else {
            let spec: FullModelSpec = if value.get("asymptotic").is_some() {
                let mut v = value;
                if let Some(obj) = v.as_object_mut() {
                    obj.remove("asymptotic");
                }
                serde_json::from_value(v).map_err(|e| model_err(e.to_string()))?
            } else {
                // Deserializing from text keeps line and column in the message.
                serde_json::from_str(text).map_err(|e| model_err(e.to_string()))?
            };
            spec.validate()?;
            Ok(Self::Full { spec })
        }
    }

    /// The asymptotic profile attached to the document, if any.
    pub fn asymptotic_from_json(text: &str) -> Result<Option<AsymptoticProfile>> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| model_err(format!("malformed JSON: {e}")))?;
        match value.get("asymptotic") {
            None => Ok(None),
            Some(v) => {
                let ap: AsymptoticProfile =
                    serde_json::from_value(v.clone()).map_err(|e| model_err(format!("asymptotic: {e}")))?;
                ap.validate()?;
                Ok(Some(ap))
            }
        }
    }

    pub fn conditional(&self) -> Result<Option<ReducedConditional>> {
        match self {
            Self::Full { spec } => reduce_conditional(spec).map(Some),
            Self::Reduced { reduced, .. } => Ok(reduced.conditional),
        }
    }

    pub fn unconditional(&self) -> Result<Option<ReducedUnconditional>> {
        match self {
            Self::Full { spec } => reduce_unconditional(spec).map(Some),
            Self::Reduced { reduced, .. } => Ok(reduced.unconditional),
        }
    }

    pub fn full_spec(&self) -> Option<&FullModelSpec> {
        match self {
            Self::Full { spec } => Some(spec),
            Self::Reduced { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_dim_spec() -> FullModelSpec {
        FullModelSpec {
            p: 2,
            mu0: vec![1.0, 0.0],
            mu1: vec![-1.0, 0.0],
            sigma: vec![1.0, 0.0, 0.0, 1.0],
            m0: vec![1.0, 0.0],
            m1: vec![-1.0, 0.0],
            nu0: 10.0,
            nu1: 10.0,
            n0: 10,
            n1: 10,
            alpha0: 0.5,
        }
    }

    #[test]
    fn identity_reduction() {
        let rc = reduce_conditional(&two_dim_spec()).unwrap();
        assert_eq!(rc.delta2, 4.0);
        assert_eq!(rc.eta_m0_mu0, 0.0);
        assert_eq!(rc.eta_m0_mu1, 4.0);
        assert_eq!(rc.eta_m0mu0_mu0mu1, 0.0);
        assert_eq!(rc.eta_m0mu0_m1mu0, 0.0);
        assert_eq!(rc.eta_m1mu1_m0mu1, 0.0);
        assert_eq!(rc.eta_m1mu1_mu1mu0, 0.0);
        assert_eq!(rc.c, 0.0);
        assert_eq!(rc.beta0, 1.0);
        let ru = reduce_unconditional(&two_dim_spec()).unwrap();
        assert_eq!(ru.prior_delta2, 4.0);
    }

    #[test]
    fn threshold_from_prior() {
        let mut spec = two_dim_spec();
        spec.alpha0 = 0.25;
        let rc = reduce_conditional(&spec).unwrap();
        assert_abs_diff_eq!(rc.c, 3f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(rc.alpha0(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn equal_prior_means_give_zero_distance() {
        let mut spec = two_dim_spec();
        spec.m1 = spec.m0.clone();
        assert_eq!(reduce_unconditional(&spec).unwrap().prior_delta2, 0.0);
    }

    #[test]
    fn diagonal_covariance_distance() {
        let p = 3;
        let mut sigma = vec![0.0; 9];
        for i in 0..p {
            sigma[i * p + i] = 2.0;
        }
        let spec = FullModelSpec {
            p,
            mu0: vec![1.0, 0.0, 0.0],
            mu1: vec![-1.0, 0.0, 0.0],
            sigma,
            m0: vec![2.0, 0.0, 0.0],
            m1: vec![0.0, 0.0, 0.0],
            nu0: 1.0,
            nu1: 1.0,
            n0: 5,
            n1: 5,
            alpha0: 0.5,
        };
        assert_abs_diff_eq!(reduce_unconditional(&spec).unwrap().prior_delta2, 2.0, epsilon = 1e-14);
    }

    /// Dense 2×2 inverse assembled by hand, independent of the Cholesky path.
    fn eta_dense(sigma: [[f64; 2]; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
        let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[1][0];
        let inv = [[sigma[1][1] / det, -sigma[0][1] / det], [-sigma[1][0] / det, sigma[0][0] / det]];
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += a[i] * inv[i][j] * b[j];
            }
        }
        s
    }

    #[test]
    fn equal_element_setup_matches_dense_oracle() {
        let spec = FullModelSpec::equal_element_means(2, 0.1, 4.0, 0.01, 50.0, 20, 20, 0.5).unwrap();
        let rc = reduce_conditional(&spec).unwrap();
        let sig = [[1.0, 0.1], [0.1, 1.0]];
        let v = |x: &[f64]| [x[0], x[1]];
        let d = |a: &[f64], b: &[f64]| [a[0] - b[0], a[1] - b[1]];
        let (mu0, mu1, m0, m1) = (v(&spec.mu0), v(&spec.mu1), v(&spec.m0), v(&spec.m1));
        let m0mu0 = d(&m0, &mu0);
        let m1mu1 = d(&m1, &mu1);
        assert_abs_diff_eq!(rc.delta2, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rc.delta2, eta_dense(sig, d(&mu0, &mu1), d(&mu0, &mu1)), epsilon = 1e-12);
        assert_abs_diff_eq!(rc.eta_m0_mu0, eta_dense(sig, m0mu0, m0mu0), epsilon = 1e-14);
        // m0 − μ0 = 0.01 μ0, so η_{m0,μ0} = 1e-4 · μ0ᵀΣ⁻¹μ0 = 1e-4 · δ²/4.
        assert_abs_diff_eq!(rc.eta_m0_mu0, 1e-4, epsilon = 1e-14);
        assert_abs_diff_eq!(rc.eta_m0_mu1, eta_dense(sig, d(&m0, &mu1), d(&m0, &mu1)), epsilon = 1e-12);
        assert_abs_diff_eq!(rc.eta_m1_mu0, eta_dense(sig, d(&m1, &mu0), d(&m1, &mu0)), epsilon = 1e-12);
        assert_abs_diff_eq!(rc.eta_m1_mu1, eta_dense(sig, m1mu1, m1mu1), epsilon = 1e-14);
        assert_abs_diff_eq!(rc.eta_m0mu0_mu0mu1, eta_dense(sig, m0mu0, d(&mu0, &mu1)), epsilon = 1e-13);
        assert_abs_diff_eq!(rc.eta_m0mu0_m1mu0, eta_dense(sig, m0mu0, d(&m1, &mu0)), epsilon = 1e-13);
        assert_abs_diff_eq!(rc.eta_m1mu1_m0mu1, eta_dense(sig, m1mu1, d(&m0, &mu1)), epsilon = 1e-13);
        assert_abs_diff_eq!(rc.eta_m1mu1_mu1mu0, eta_dense(sig, m1mu1, d(&mu1, &mu0)), epsilon = 1e-13);
    }

    #[test]
    fn rejects_bad_models() {
        let mut spec = two_dim_spec();
        spec.sigma = vec![1.0, 2.0, 2.0, 1.0];
        assert!(matches!(reduce_conditional(&spec), Err(Error::Model(_))));
        let mut spec = two_dim_spec();
        spec.mu0 = vec![1.0];
        assert!(matches!(reduce_conditional(&spec), Err(Error::Model(_))));
        let mut spec = two_dim_spec();
        spec.alpha0 = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn quadratic_clamp_policy() {
        let mut rc = ReducedConditional::centered(4, 10, 1.0, 4.0, 0.0).unwrap();
        rc.eta_m0_mu0 = -5e-11;
        assert_eq!(rc.validated().unwrap().eta_m0_mu0, 0.0);
        rc.eta_m0_mu0 = -1e-9;
        assert!(rc.validated().is_err());
    }

    #[test]
    fn swap_exchanges_fields() {
        let mut rc = ReducedConditional::centered(4, 10, 1.0, 4.0, 0.3).unwrap();
        rc.n1 = 30;
        let s = rc.swap_classes();
        assert_eq!((s.n0, s.n1), (30, 10));
        assert_eq!(s.c, -0.3);
        let sym = ReducedConditional::centered(4, 10, 1.0, 4.0, 0.0).unwrap();
        assert_eq!(sym.swap_classes(), sym);
    }

    #[test]
    fn json_forms() {
        let full = serde_json::to_string(&two_dim_spec()).unwrap();
        let doc = ModelDocument::from_json(&full).unwrap();
        assert_eq!(doc.full_spec().unwrap(), &two_dim_spec());

        let nested = r#"{"p":2,"mu0":[1,0],"mu1":[-1,0],"sigma":[[1,0],[0,1]],"m0":[1,0],"m1":[-1,0],
            "nu0":10,"nu1":10,"n0":10,"n1":10,"alpha0":0.5}"#;
        assert_eq!(ModelDocument::from_json(nested).unwrap().full_spec().unwrap(), &two_dim_spec());

        let missing = r#"{"p":2,"mu0":[1,0],"mu1":[-1,0],"sigma":[1,0,0,1],"m0":[1,0],"m1":[-1,0],
            "nu1":10,"n0":10,"n1":10,"alpha0":0.5}"#;
        let err = ModelDocument::from_json(missing).unwrap_err().to_string();
        assert!(err.contains("nu0"), "{err}");

        let reduced = r#"{"reduced":{"unconditional":{"p":4,"n0":20,"n1":20,"nu0":20,"nu1":20,"c":0,"Delta2":4}}}"#;
        let doc = ModelDocument::from_json(reduced).unwrap();
        assert_eq!(doc.unconditional().unwrap().unwrap().prior_delta2, 4.0);
        assert!(doc.conditional().unwrap().is_none());
    }

    fn random_spd(p: usize, seed: &[f64]) -> Vec<f64> {
        // A Aᵀ + p I from a seeded fill.
        let a: Vec<f64> = (0..p * p).map(|k| seed[k % seed.len()] * ((k as f64) * 0.37).sin()).collect();
        let mut s = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                s[i * p + j] = (0..p).map(|k| a[i * p + k] * a[j * p + k]).sum::<f64>();
            }
            s[i * p + i] += p as f64;
        }
        s
    }

    proptest! {
        #[test]
        fn mahalanobis_invariance(
            vals in proptest::collection::vec(-2.0f64..2.0, 12),
            tf in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let p = 3;
            let spec = FullModelSpec {
                p,
                mu0: vals[0..3].to_vec(),
                mu1: vals[3..6].to_vec(),
                sigma: random_spd(p, &vals),
                m0: vals[6..9].to_vec(),
                m1: vals[9..12].to_vec(),
                nu0: 3.0, nu1: 7.0, n0: 11, n1: 13, alpha0: 0.4,
            };
            // A = I·2 + small perturbation keeps it invertible.
            let a: Vec<f64> = (0..9).map(|k| tf[k] * 0.3 + if k % 4 == 0 { 2.0 } else { 0.0 }).collect();
            let am = DMatrix::from_row_slice(3, 3, &a);
            let tv = |v: &[f64]| (&am * DVector::from_column_slice(v)).as_slice().to_vec();
            let sm = DMatrix::from_row_slice(3, 3, &spec.sigma);
            let st = &am * sm * am.transpose();
            let mut st_rows = Vec::with_capacity(9);
            for i in 0..3 { for j in 0..3 { st_rows.push(0.5 * (st[(i, j)] + st[(j, i)])); } }
            let moved = FullModelSpec {
                mu0: tv(&spec.mu0), mu1: tv(&spec.mu1), m0: tv(&spec.m0), m1: tv(&spec.m1),
                sigma: st_rows, ..spec.clone()
            };
            let r1 = reduce_conditional(&spec).unwrap();
            let r2 = reduce_conditional(&moved).unwrap();
            let pairs = [
                (r1.delta2, r2.delta2), (r1.eta_m0_mu0, r2.eta_m0_mu0), (r1.eta_m0_mu1, r2.eta_m0_mu1),
                (r1.eta_m1_mu0, r2.eta_m1_mu0), (r1.eta_m1_mu1, r2.eta_m1_mu1),
                (r1.eta_m0mu0_mu0mu1, r2.eta_m0mu0_mu0mu1), (r1.eta_m0mu0_m1mu0, r2.eta_m0mu0_m1mu0),
                (r1.eta_m1mu1_m0mu1, r2.eta_m1mu1_m0mu1), (r1.eta_m1mu1_mu1mu0, r2.eta_m1mu1_mu1mu0),
            ];
            for (x, y) in pairs {
                prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{x} vs {y}");
            }
        }

        #[test]
        fn swap_is_involution(
            n0 in 1u32..500, n1 in 1u32..500, b0 in 0.01f64..10.0, b1 in 0.01f64..10.0,
            c in -3.0f64..3.0, e in proptest::collection::vec(-5.0f64..5.0, 9),
        ) {
            let rc = ReducedConditional {
                p: 7, n0, n1, beta0: b0, beta1: b1, c,
                delta2: e[0].abs(), eta_m0_mu0: e[1].abs(), eta_m0_mu1: e[2].abs(),
                eta_m1_mu0: e[3].abs(), eta_m1_mu1: e[4].abs(),
                eta_m0mu0_mu0mu1: e[5], eta_m0mu0_m1mu0: e[6], eta_m1mu1_m0mu1: e[7], eta_m1mu1_mu1mu0: e[8],
            };
            prop_assert_eq!(rc.swap_classes().swap_classes(), rc);
        }

        #[test]
        fn conditional_and_unconditional_distances_agree_when_priors_are_exact(
            vals in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let p = 3;
            let spec = FullModelSpec {
                p, mu0: vals[0..3].to_vec(), mu1: vals[3..6].to_vec(),
                sigma: random_spd(p, &vals), m0: vals[0..3].to_vec(), m1: vals[3..6].to_vec(),
                nu0: 1.0, nu1: 1.0, n0: 3, n1: 3, alpha0: 0.5,
            };
            let d = reduce_conditional(&spec).unwrap().delta2;
            let dm = reduce_unconditional(&spec).unwrap().prior_delta2;
            prop_assert!((d - dm).abs() <= 1e-12 * d.max(1.0));
        }
    }
}
