//! Seeded Monte Carlo estimates of the moments the analytic engine predicts.
//!
//! All statistics are invariant under `x ↦ L⁻¹x`, so the simulation runs in
//! whitened coordinates where the covariance is the identity. Every
//! `(outer replicate, chunk)` pair owns an independent ChaCha stream derived
//! from the master seed, and partial sums are combined in index order, which
//! makes results bit-identical for any number of worker threads.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{model_err, Error, Result};
use crate::gauss::phi;
use crate::model::{CholeskyFactor, FullModelSpec, Mode};
use crate::moments::{ClassMoments, Mixture};

/// Inner replications handled by one RNG stream.
const CHUNK: usize = 512;

/// Consecutive degenerate draws tolerated before giving up.
const MAX_REDRAWS: u32 = 1000;

/// How a sample is generated for each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Draw the class sample means directly from `N(μ_i, Σ/n_i)`.
    #[default]
    SampleMeans,
    /// Draw all `n_i` points per class and average them.
    FullSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub mode: Mode,
    /// Inner replications (samples per fixed pair of true means).
    pub t1: u64,
    /// Outer replications (draws of the true means); 1 in conditional mode.
    pub t2: u64,
    pub seed: u64,
    pub spec: FullModelSpec,
    #[serde(default)]
    pub sampler: Sampler,
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimates {
    pub config: McConfig,
    /// Number of `(ε, ε̂)` pairs generated, `t1 · t2`.
    pub pairs: u64,
    /// Samples redrawn because the two sample means coincided.
    pub redraws: u64,
    pub class: ClassMoments<Estimate>,
    pub mixture: Mixture<Estimate>,
    /// Moments of the sample squared Mahalanobis distance between class means.
    pub delta2_hat_mean: Estimate,
    pub delta2_hat_var: Estimate,
    pub elapsed_secs: f64,
}

impl McEstimates {
    /// Everything except timing, for reproducibility comparisons.
    pub fn same_results(&self, other: &Self) -> bool {
        self.config == other.config
            && self.pairs == other.pairs
            && self.redraws == other.redraws
            && self.class == other.class
            && self.mixture == other.mixture
            && self.delta2_hat_mean == other.delta2_hat_mean
            && self.delta2_hat_var == other.delta2_hat_var
    }
}

/// Per-class errors and their prior-weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub class0: f64,
    pub class1: f64,
    pub total: f64,
}

impl ErrorPair {
    fn new(class0: f64, class1: f64, alpha0: f64) -> Self {
        Self { class0, class1, total: alpha0 * class0 + (1.0 - alpha0) * class1 }
    }
}

/// Anderson's statistic `W = (x − (x̄0 + x̄1)/2)ᵀ Σ⁻¹ (x̄0 − x̄1)`; class 1 is chosen when `W ≤ c`.
pub fn anderson_w(xbar0: &[f64], xbar1: &[f64], x: &[f64], chol: &CholeskyFactor) -> Result<f64> {
    let (w0, w1, wx) = (chol.whiten(xbar0)?, chol.whiten(xbar1)?, chol.whiten(x)?);
    Ok(w_statistic(w0.as_slice(), w1.as_slice(), wx.as_slice()))
}

/// True class-conditional misclassification probabilities of the LDA rule.
pub fn true_error(
    xbar0: &[f64],
    xbar1: &[f64],
    mu0: &[f64],
    mu1: &[f64],
    chol: &CholeskyFactor,
    c: f64,
    alpha0: f64,
) -> Result<ErrorPair> {
    check_alpha(alpha0)?;
    let w = [xbar0, xbar1, mu0, mu1].map(|v| chol.whiten(v));
    let [x0, x1, m0, m1] = unwrap4(w)?;
    let (e0, e1) = errors_whitened(x0.as_slice(), x1.as_slice(), m0.as_slice(), m1.as_slice(), c, [1.0, 1.0])?;
    Ok(ErrorPair::new(e0, e1, alpha0))
}

/// Bayesian MMSE estimates of the class-conditional errors.
#[allow(clippy::too_many_arguments)]
pub fn bayes_estimate(
    xbar0: &[f64],
    xbar1: &[f64],
    m0: &[f64],
    m1: &[f64],
    nu0: f64,
    nu1: f64,
    n0: u32,
    n1: u32,
    chol: &CholeskyFactor,
    c: f64,
    alpha0: f64,
) -> Result<ErrorPair> {
    check_alpha(alpha0)?;
    if !(nu0 > 0.0 && nu1 > 0.0) || n0 == 0 || n1 == 0 {
        return Err(model_err("nu_i must be positive and n_i at least 1"));
    }
    let w = [xbar0, xbar1, m0, m1].map(|v| chol.whiten(v));
    let [x0, x1, pm0, pm1] = unwrap4(w)?;
    let (post0, s0) = posterior(x0.as_slice(), pm0.as_slice(), f64::from(n0), nu0);
    let (post1, s1) = posterior(x1.as_slice(), pm1.as_slice(), f64::from(n1), nu1);
    let (e0, e1) = errors_whitened(x0.as_slice(), x1.as_slice(), &post0, &post1, c, [s0, s1])?;
    Ok(ErrorPair::new(e0, e1, alpha0))
}

fn unwrap4(w: [Result<DVector<f64>>; 4]) -> Result<[DVector<f64>; 4]> {
    let [a, b, c, d] = w;
    Ok([a?, b?, c?, d?])
}

fn check_alpha(alpha0: f64) -> Result<()> {
    if alpha0 > 0.0 && alpha0 < 1.0 {
        Ok(())
    } else {
        Err(model_err("alpha0 must lie strictly between 0 and 1"))
    }
}

fn w_statistic(x0: &[f64], x1: &[f64], x: &[f64]) -> f64 {
    x0.iter().zip(x1).zip(x).map(|((a, b), v)| (v - 0.5 * (a + b)) * (a - b)).sum()
}

/// Posterior mean and the predictive scale `√(ν*/(ν*+1))`.
fn posterior(xbar: &[f64], m: &[f64], n: f64, nu: f64) -> (Vec<f64>, f64) {
    let post = xbar.iter().zip(m).map(|(x, mm)| (n * x + nu * mm) / (n + nu)).collect();
    let nu_star = n + nu;
    (post, (nu_star / (nu_star + 1.0)).sqrt())
}

/// Errors of the rule built from whitened means `x0`, `x1` when class `i`
/// features are centred at `centre_i` with scale `1/scale_i`.
fn errors_whitened(
    x0: &[f64],
    x1: &[f64],
    centre0: &[f64],
    centre1: &[f64],
    c: f64,
    scale: [f64; 2],
) -> Result<(f64, f64)> {
    let mut nd2 = 0.0;
    let (mut l0, mut l1) = (0.0, 0.0);
    for k in 0..x0.len() {
        let d = x0[k] - x1[k];
        let mid = 0.5 * (x0[k] + x1[k]);
        nd2 += d * d;
        l0 += (centre0[k] - mid) * d;
        l1 += (centre1[k] - mid) * d;
    }
    if nd2 == 0.0 {
        return Err(Error::DegenerateSample);
    }
    let nd = nd2.sqrt();
    Ok((phi(scale[0] * (c - l0) / nd), phi(scale[1] * (l1 - c) / nd)))
}

/// Statistics averaged per unit, in a fixed layout.
const N_STATS: usize = 23;
const S_EST_MIX: usize = 14;
const S_DIFF: usize = 19;
const S_DIFF_SQ: usize = 20;
const S_D2: usize = 21;
const S_D2_SQ: usize = 22;

fn sample_stats(eb: [f64; 2], e: [f64; 2], alpha0: f64, d2: f64) -> [f64; N_STATS] {
    let a1 = 1.0 - alpha0;
    let ebm = alpha0 * eb[0] + a1 * eb[1];
    let em = alpha0 * e[0] + a1 * e[1];
    let diff = ebm - em;
    [
        eb[0],
        eb[1],
        e[0],
        e[1],
        eb[0] * eb[0],
        eb[1] * eb[1],
        eb[0] * eb[1],
        e[0] * e[0],
        e[1] * e[1],
        e[0] * e[1],
        eb[0] * e[0],
        eb[0] * e[1],
        eb[1] * e[0],
        eb[1] * e[1],
        ebm,
        em,
        ebm * ebm,
        em * em,
        ebm * em,
        diff,
        diff * diff,
        d2,
        d2 * d2,
    ]
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn compensated_mean(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    let mut acc = Compensated::default();
    values.for_each(|v| acc.add(v));
    acc.value() / count as f64
}

/// Standard error of the mean of `values` around `mean`.
fn stderr_of(values: impl Iterator<Item = f64>, mean: f64, count: usize) -> f64 {
    if count < 2 {
        return 0.0;
    }
    let ss = compensated_mean(values.map(|v| (v - mean) * (v - mean)), count) * count as f64;
    (ss / (count as f64 - 1.0) / count as f64).sqrt()
}

struct Whitened {
    mu: [Vec<f64>; 2],
    m: [Vec<f64>; 2],
}

fn whiten_spec(spec: &FullModelSpec, chol: &CholeskyFactor) -> Result<Whitened> {
    let w = |v: &[f64]| chol.whiten(v).map(|x| x.as_slice().to_vec());
    Ok(Whitened { mu: [w(&spec.mu0)?, w(&spec.mu1)?], m: [w(&spec.m0)?, w(&spec.m1)?] })
}

fn stream_rng(seed: u64, outer: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((outer << 32) | slot);
    rng
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t1 < 2 {
            return Err(Error::Config("T1 must be at least 2".into()));
        }
        if self.t2 < 1 {
            return Err(Error::Config("T2 must be at least 1".into()));
        }
        if self.mode == Mode::Conditional && self.t2 != 1 {
            return Err(Error::Config("conditional mode uses T2 = 1".into()));
        }
        if self.t2 >= 1 << 31 || self.t1 / CHUNK as u64 >= (1 << 32) - 2 {
            return Err(Error::Config("replication counts too large".into()));
        }
        self.spec.validate()
    }
}

struct ChunkOutput {
    /// Per-sample statistics (`t2 = 1`) or a single partial sum (`t2 > 1`).
    records: Vec<[f64; N_STATS]>,
    redraws: u64,
}

struct Simulator<'a> {
    config: &'a McConfig,
    white: Whitened,
    c: f64,
    alpha0: f64,
}

impl Simulator<'_> {
    fn draw_means(&self, rng: &mut ChaCha8Rng, mu: &[Vec<f64>; 2], buf: &mut [Vec<f64>; 2]) {
        let spec = &self.config.spec;
        for (i, n) in [spec.n0, spec.n1].into_iter().enumerate() {
            match self.config.sampler {
                Sampler::SampleMeans => {
                    let s = 1.0 / f64::from(n).sqrt();
                    for (b, m) in buf[i].iter_mut().zip(&mu[i]) {
                        let z: f64 = rng.sample(StandardNormal);
                        *b = m + s * z;
                    }
                }
                Sampler::FullSample => {
                    buf[i].iter_mut().for_each(|b| *b = 0.0);
                    for _ in 0..n {
                        for b in buf[i].iter_mut() {
                            let z: f64 = rng.sample(StandardNormal);
                            *b += z;
                        }
                    }
                    let inv = 1.0 / f64::from(n);
                    for (b, m) in buf[i].iter_mut().zip(&mu[i]) {
                        *b = m + *b * inv;
                    }
                }
            }
        }
    }

    fn one_sample(
        &self,
        rng: &mut ChaCha8Rng,
        mu: &[Vec<f64>; 2],
        buf: &mut [Vec<f64>; 2],
    ) -> Result<(u64, [f64; N_STATS])> {
        let spec = &self.config.spec;
        let mut redraws = 0u64;
        loop {
            self.draw_means(rng, mu, buf);
            let (x0, x1) = (&buf[0], &buf[1]);
            let truth = errors_whitened(x0, x1, &mu[0], &mu[1], self.c, [1.0, 1.0]);
            let truth = match truth {
                Ok(t) => t,
                Err(Error::DegenerateSample) => {
                    redraws += 1;
                    if redraws > u64::from(MAX_REDRAWS) {
                        return Err(Error::DegenerateSample);
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (post0, s0) = posterior(x0, &self.white.m[0], f64::from(spec.n0), spec.nu0);
            let (post1, s1) = posterior(x1, &self.white.m[1], f64::from(spec.n1), spec.nu1);
            let est = errors_whitened(x0, x1, &post0, &post1, self.c, [s0, s1])?;
            let d2: f64 = x0.iter().zip(x1).map(|(a, b)| (a - b) * (a - b)).sum();
            return Ok((redraws, sample_stats([est.0, est.1], [truth.0, truth.1], self.alpha0, d2)));
        }
    }

    fn chunk(&self, outer: u64, chunk: u64, mu: &[Vec<f64>; 2]) -> Result<ChunkOutput> {
        let t1 = self.config.t1;
        let start = chunk * CHUNK as u64;
        let len = (t1 - start).min(CHUNK as u64) as usize;
        let mut rng = stream_rng(self.config.seed, outer, chunk + 1);
        let p = self.config.spec.p;
        let mut buf = [vec![0.0; p], vec![0.0; p]];
        let mut redraws = 0;
        if self.config.t2 == 1 {
            let mut records = Vec::with_capacity(len);
            for _ in 0..len {
                let (r, s) = self.one_sample(&mut rng, mu, &mut buf)?;
                redraws += r;
                records.push(s);
            }
            Ok(ChunkOutput { records, redraws })
        } else {
            let mut acc = [Compensated::default(); N_STATS];
            for _ in 0..len {
                let (r, s) = self.one_sample(&mut rng, mu, &mut buf)?;
                redraws += r;
                for (a, v) in acc.iter_mut().zip(s) {
                    a.add(v);
                }
            }
            Ok(ChunkOutput { records: vec![acc.map(Compensated::value)], redraws })
        }
    }

    fn outer_means(&self, outer: u64) -> [Vec<f64>; 2] {
        match self.config.mode {
            Mode::Conditional => self.white.mu.clone(),
            Mode::Unconditional => {
                let mut rng = stream_rng(self.config.seed, outer, 0);
                let spec = &self.config.spec;
                let mut draw = |m: &[f64], nu: f64| -> Vec<f64> {
                    let s = 1.0 / nu.sqrt();
                    m.iter()
                        .map(|x| {
                            let z: f64 = rng.sample(StandardNormal);
                            x + s * z
                        })
                        .collect()
                };
                let mu0 = draw(&self.white.m[0], spec.nu0);
                let mu1 = draw(&self.white.m[1], spec.nu1);
                [mu0, mu1]
            }
        }
    }
}

/// Run the simulation on the current rayon pool.
pub fn run(config: &McConfig) -> Result<McEstimates> {
    config.validate()?;
    let started = Instant::now();
    let chol = config.spec.cholesky()?;
    let sim = Simulator {
        config,
        white: whiten_spec(&config.spec, &chol)?,
        c: config.spec.threshold(),
        alpha0: config.spec.alpha0,
    };

    let n_chunks = config.t1.div_ceil(CHUNK as u64);
    let mus: Vec<[Vec<f64>; 2]> = (0..config.t2).map(|o| sim.outer_means(o)).collect();
    let tasks: Vec<(u64, u64)> = (0..config.t2).flat_map(|o| (0..n_chunks).map(move |k| (o, k))).collect();
    let outputs: Vec<ChunkOutput> =
        tasks.par_iter().map(|&(o, k)| sim.chunk(o, k, &mus[o as usize])).collect::<Result<_>>()?;

    let redraws = outputs.iter().map(|o| o.redraws).sum();
    let units: Vec<[f64; N_STATS]> = if config.t2 == 1 {
        outputs.into_iter().flat_map(|o| o.records).collect()
    } else {
        outputs
            .chunks(n_chunks as usize)
            .map(|per_outer| {
                let mut acc = [Compensated::default(); N_STATS];
                for part in per_outer {
                    for (a, v) in acc.iter_mut().zip(part.records[0]) {
                        a.add(v);
                    }
                }
                acc.map(|a| a.value() / config.t1 as f64)
            })
            .collect()
    };

    let (class, mixture, delta2_hat_mean, delta2_hat_var) = summarize(&units);
    Ok(McEstimates {
        config: config.clone(),
        pairs: config.t1 * config.t2,
        redraws,
        class,
        mixture,
        delta2_hat_mean,
        delta2_hat_var,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}

/// Run the simulation on a dedicated pool with `threads` workers.
pub fn run_with_threads(config: &McConfig, threads: usize) -> Result<McEstimates> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(config))
}

fn summarize(units: &[[f64; N_STATS]]) -> (ClassMoments<Estimate>, Mixture<Estimate>, Estimate, Estimate) {
    let u = units.len();
    let means: Vec<f64> = (0..N_STATS).map(|k| compensated_mean(units.iter().map(|r| r[k]), u)).collect();
    let est = |k: usize| Estimate { mean: means[k], stderr: stderr_of(units.iter().map(|r| r[k]), means[k], u) };

    // Smooth functions of means get delta-method errors from their per-unit linearization.
    let linearized = |f: &dyn Fn(&[f64; N_STATS]) -> f64| {
        let vals: Vec<f64> = units.iter().map(f).collect();
        let m = compensated_mean(vals.iter().copied(), u);
        stderr_of(vals.into_iter(), m, u)
    };
    let centered_var = |a: usize, b: usize| {
        let mean = means[a];
        let value = means[b] - mean * mean;
        let stderr = linearized(&|r: &[f64; N_STATS]| r[b] - 2.0 * mean * r[a]);
        (value, stderr)
    };

    let class = ClassMoments {
        est_first: [est(0), est(1)],
        true_first: [est(2), est(3)],
        est_second: [[est(4), est(6)], [est(6), est(5)]],
        true_second: [[est(7), est(9)], [est(9), est(8)]],
        cross: [[est(10), est(11)], [est(12), est(13)]],
    };

    let (dev_var, dev_var_se) = centered_var(S_DIFF, S_DIFF_SQ);
    let mse = means[S_DIFF_SQ];
    let rms = mse.max(0.0).sqrt();
    let rms_se = if rms > 0.0 { est(S_DIFF_SQ).stderr / (2.0 * rms) } else { 0.0 };
    let mixture = Mixture {
        est_mean: est(S_EST_MIX),
        true_mean: est(S_EST_MIX + 1),
        est_sq: est(S_EST_MIX + 2),
        true_sq: est(S_EST_MIX + 3),
        cross: est(S_EST_MIX + 4),
        bias: est(S_DIFF),
        dev_var: Estimate { mean: dev_var.max(0.0), stderr: dev_var_se },
        rms: Estimate { mean: rms, stderr: rms_se },
    };
    let (d2_var, d2_var_se) = centered_var(S_D2, S_D2_SQ);
    (class, mixture, est(S_D2), Estimate { mean: d2_var, stderr: d2_var_se })
}
