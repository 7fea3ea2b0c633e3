//! Worst-case RMS bounds and minimum sample sizes.
//!
//! The bound `κ(n, p, β)` is the RMS at zero class separation with equal
//! designs `n0 = n1 = n/2`, `ν_i = β n/2`, and priors centred on the true
//! means. A sample size is adequate once `κ` drops below the target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mode, ReducedConditional, ReducedUnconditional};
use crate::moments::{conditional_moment_matrix, unconditional_moment_matrix};

/// Default look-ahead for [`ScanRule::Safe`].
pub const DEFAULT_HORIZON: u32 = 200;

/// Smallest sample size considered by the scan.
pub const MIN_N: u32 = 4;

/// Target RMS values of the reference grid.
pub const TABLE_TAUS_CONDITIONAL: [f64; 6] = [0.1, 0.09, 0.08, 0.07, 0.06, 0.05];
pub const TABLE_TAUS_UNCONDITIONAL: [f64; 5] = [0.025, 0.02, 0.015, 0.01, 0.005];
pub const TABLE_PS: [u32; 7] = [2, 4, 8, 16, 32, 64, 128];

/// How the scan decides that a sample size is adequate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule")]
pub enum ScanRule {
    /// First even `n` with `κ(n) < τ`.
    Literal,
    /// First even `n` with `κ(n′) < τ` for every even `n′` in `[n, n + horizon]`.
    Safe { horizon: u32 },
}

impl Default for ScanRule {
    fn default() -> Self {
        Self::Safe { horizon: DEFAULT_HORIZON }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanQuery {
    pub mode: Mode,
    pub p: u32,
    pub beta: f64,
    pub tau: f64,
    pub n_max: u32,
    pub rule: ScanRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    /// Minimum adequate even sample size, or `None` when the ceiling was reached.
    pub n_min: Option<u32>,
    pub kappa_at_n: Option<f64>,
    /// Every `(n, κ(n))` evaluated, in scan order.
    pub trace: Vec<(u32, f64)>,
}

/// Worst-case RMS at total sample size `n` (even).
pub fn kappa(n: u32, p: u32, beta: f64, mode: Mode) -> Result<f64> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Config(format!("sample size n = {n} must be even and at least 2")));
    }
    if p == 0 {
        return Err(Error::Config("dimension p must be positive".into()));
    }
    let half = n / 2;
    let nu = beta * f64::from(half);
    if !nu.is_finite() || nu < 1e-9 {
        return Err(Error::Config(format!("prior certainty nu = beta * n / 2 = {nu} is too small")));
    }
    let mm = match mode {
        Mode::Conditional => conditional_moment_matrix(&ReducedConditional::centered(p, half, beta, 0.0, 0.0)?)?,
        Mode::Unconditional => unconditional_moment_matrix(&ReducedUnconditional {
            p,
            n0: half,
            n1: half,
            nu0: nu,
            nu1: nu,
            c: 0.0,
            prior_delta2: 0.0,
        })?,
    };
    Ok(mm.mixture.rms)
}

impl PlanQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau = {} must lie in (0, 1)", self.tau)));
        }
        if self.p == 0 {
            return Err(Error::Config("p must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config("beta must be positive and finite".into()));
        }
        if self.n_max < MIN_N || !self.n_max.is_multiple_of(2) {
            return Err(Error::Config(format!("n_max = {} must be even and at least {MIN_N}", self.n_max)));
        }
        if let ScanRule::Safe { horizon } = self.rule {
            if horizon % 2 != 0 {
                return Err(Error::Config("safe-scan horizon must be even".into()));
            }
        }
        Ok(())
    }
}

/// Linear scan over even `n` from [`MIN_N`] up to `n_max`.
pub fn min_n(query: &PlanQuery) -> Result<PlanResult> {
    query.validate()?;
    let eval = |n: u32| kappa(n, query.p, query.beta, query.mode);
    let mut trace = Vec::new();
    match query.rule {
        ScanRule::Literal => {
            for n in (MIN_N..=query.n_max).step_by(2) {
                let k = eval(n)?;
                trace.push((n, k));
                if k < query.tau {
                    return Ok(PlanResult { n_min: Some(n), kappa_at_n: Some(k), trace });
                }
            }
        }
        ScanRule::Safe { horizon } => {
            let mut candidate: Option<(u32, f64)> = None;
            let mut n = MIN_N;
            loop {
                if candidate.is_none() && n > query.n_max {
                    break;
                }
                let k = eval(n)?;
                trace.push((n, k));
                if k < query.tau {
                    if candidate.is_none() {
                        candidate = Some((n, k));
                    }
                } else {
                    candidate = None;
                }
                if let Some((n0, k0)) = candidate {
                    if n >= n0 + horizon {
                        return Ok(PlanResult { n_min: Some(n0), kappa_at_n: Some(k0), trace });
                    }
                }
                n += 2;
            }
        }
    }
    Ok(PlanResult { n_min: None, kappa_at_n: None, trace })
}

/// One cell of a `(τ, p)` planning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCell {
    pub tau: f64,
    pub p: u32,
    pub mode: Mode,
    pub beta: f64,
    pub n_max: u32,
    pub n_min: Option<u32>,
    pub kappa_at_n_min: Option<f64>,
}

/// Evaluate `min_n` over all `(τ, p)` pairs in parallel; rows follow `taus`, columns `ps`.
pub fn plan_grid(mode: Mode, beta: f64, taus: &[f64], ps: &[u32], n_max: u32, rule: ScanRule) -> Result<Vec<PlanCell>> {
    let cells: Vec<(f64, u32)> = taus.iter().flat_map(|&t| ps.iter().map(move |&p| (t, p))).collect();
    cells
        .par_iter()
        .map(|&(tau, p)| {
            let r = min_n(&PlanQuery { mode, p, beta, tau, n_max, rule })?;
            Ok(PlanCell { tau, p, mode, beta, n_max, n_min: r.n_min, kappa_at_n_min: r.kappa_at_n })
        })
        .collect()
}
