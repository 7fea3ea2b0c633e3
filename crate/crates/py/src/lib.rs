//! Python bindings: model types, analytic moments, the Monte Carlo oracle and the planner.

use std::collections::BTreeMap;

use errmoments as core;
use errmoments::{Mode, ScanRule};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

create_exception!(
    errmoments,
    InconsistentMomentsError,
    PyArithmeticError,
    "The approximate moments imply a negative deviation variance."
);

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Inconsistent(_) => InconsistentMomentsError::new_err(e.to_string()),
        core::Error::Numeric(_) | core::Error::DegenerateSample => PyArithmeticError::new_err(e.to_string()),
        core::Error::Model(_) | core::Error::Config(_) => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    mode.parse().map_err(to_py)
}

fn parse_rule(rule: &str, horizon: u32) -> PyResult<ScanRule> {
    match rule {
        "literal" => Ok(ScanRule::Literal),
        "safe" => Ok(ScanRule::Safe { horizon }),
        other => Err(PyValueError::new_err(format!("unknown scan rule `{other}`; use `literal` or `safe`"))),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Analytic moments of the estimator and the true error, with mixture metrics.
#[pyclass(name = "MomentMatrix", module = "errmoments", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyMomentMatrix(core::MomentMatrix);

#[pymethods]
impl PyMomentMatrix {
    #[getter]
    fn alpha0(&self) -> f64 {
        self.0.alpha0
    }

    #[getter]
    fn bias(&self) -> f64 {
        self.0.mixture.bias
    }

    #[getter]
    fn dev_var(&self) -> f64 {
        self.0.mixture.dev_var
    }

    #[getter]
    fn rms(&self) -> f64 {
        self.0.mixture.rms
    }

    #[getter]
    fn est_mean(&self) -> f64 {
        self.0.mixture.est_mean
    }

    #[getter]
    fn true_mean(&self) -> f64 {
        self.0.mixture.true_mean
    }

    /// Entry names whose correlation ratio was clamped.
    #[getter]
    fn clamped(&self) -> Vec<String> {
        self.0.clamped.clone()
    }

    /// All per-class and mixture entries by name.
    fn entries(&self) -> BTreeMap<&'static str, f64> {
        self.0.entries().into_iter().collect()
    }

    fn __repr__(&self) -> String {
        let m = &self.0.mixture;
        format!("MomentMatrix(bias={}, dev_var={}, rms={})", m.bias, m.dev_var, m.rms)
    }
}

/// Inputs of the conditional formulas, expressed through Mahalanobis invariants.
#[pyclass(name = "ReducedConditional", module = "errmoments", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyReducedConditional(core::ReducedConditional);

#[pymethods]
impl PyReducedConditional {
    #[new]
    #[pyo3(signature = (
        *, p, n0, n1, beta0, beta1, c, delta2, eta_m0_mu0, eta_m0_mu1, eta_m1_mu0, eta_m1_mu1,
        eta_m0mu0_mu0mu1, eta_m0mu0_m1mu0, eta_m1mu1_m0mu1, eta_m1mu1_mu1mu0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        p: u32,
        n0: u32,
        n1: u32,
        beta0: f64,
        beta1: f64,
        c: f64,
        delta2: f64,
        eta_m0_mu0: f64,
        eta_m0_mu1: f64,
        eta_m1_mu0: f64,
        eta_m1_mu1: f64,
        eta_m0mu0_mu0mu1: f64,
        eta_m0mu0_m1mu0: f64,
        eta_m1mu1_m0mu1: f64,
        eta_m1mu1_mu1mu0: f64,
    ) -> PyResult<Self> {
        let rc = core::ReducedConditional {
            p,
            n0,
            n1,
            beta0,
            beta1,
            c,
            delta2,
            eta_m0_mu0,
            eta_m0_mu1,
            eta_m1_mu0,
            eta_m1_mu1,
            eta_m0mu0_mu0mu1,
            eta_m0mu0_m1mu0,
            eta_m1mu1_m0mu1,
            eta_m1mu1_mu1mu0,
        };
        rc.validated().map(Self).map_err(to_py)
    }

    /// Prior means equal to the true means, which sit symmetrically at squared distance `delta2`.
    #[staticmethod]
    #[pyo3(signature = (p, n_per_class, beta, delta2, c = 0.0))]
    fn centered(p: u32, n_per_class: u32, beta: f64, delta2: f64, c: f64) -> PyResult<Self> {
        core::ReducedConditional::centered(p, n_per_class, beta, delta2, c).map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.0.alpha0()
    }

    #[getter]
    fn delta2(&self) -> f64 {
        self.0.delta2
    }

    fn swap_classes(&self) -> Self {
        Self(self.0.swap_classes())
    }

    fn moments(&self) -> PyResult<PyMomentMatrix> {
        core::conditional_moment_matrix(&self.0).map(PyMomentMatrix).map_err(to_py)
    }

    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &core::conditional_coefficients(&self.0))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        format!("ReducedConditional({:?})", self.0)
    }
}

/// Inputs of the prior-averaged formulas.
#[pyclass(name = "ReducedUnconditional", module = "errmoments", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyReducedUnconditional(core::ReducedUnconditional);

#[pymethods]
impl PyReducedUnconditional {
    #[new]
    #[pyo3(signature = (*, p, n0, n1, nu0, nu1, prior_delta2, c = 0.0))]
    fn new(p: u32, n0: u32, n1: u32, nu0: f64, nu1: f64, prior_delta2: f64, c: f64) -> PyResult<Self> {
        core::ReducedUnconditional { p, n0, n1, nu0, nu1, c, prior_delta2 }.validated().map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha0(&self) -> f64 {
        self.0.alpha0()
    }

    fn swap_classes(&self) -> Self {
        Self(self.0.swap_classes())
    }

    fn moments(&self) -> PyResult<PyMomentMatrix> {
        core::unconditional_moment_matrix(&self.0).map(PyMomentMatrix).map_err(to_py)
    }

    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &core::unconditional_coefficients(&self.0))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("ReducedUnconditional({:?})", self.0)
    }
}

/// Gaussian model with known covariance and conjugate priors on the class means.
#[pyclass(name = "FullModelSpec", module = "errmoments", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFullModelSpec(core::FullModelSpec);

#[pymethods]
impl PyFullModelSpec {
    /// `sigma` is a row-major list of `p * p` values.
    #[new]
    #[pyo3(signature = (*, mu0, mu1, sigma, m0, m1, nu0, nu1, n0, n1, alpha0 = 0.5))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mu0: Vec<f64>,
        mu1: Vec<f64>,
        sigma: Vec<f64>,
        m0: Vec<f64>,
        m1: Vec<f64>,
        nu0: f64,
        nu1: f64,
        n0: u32,
        n1: u32,
        alpha0: f64,
    ) -> PyResult<Self> {
        let spec = core::FullModelSpec { p: mu0.len(), mu0, mu1, sigma, m0, m1, nu0, nu1, n0, n1, alpha0 };
        spec.validate().map_err(to_py)?;
        Ok(Self(spec))
    }

    /// Parse the full JSON form.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match core::ModelDocument::from_json(text).map_err(to_py)? {
            core::ModelDocument::Full { spec } => Ok(Self(spec)),
            core::ModelDocument::Reduced { .. } => Err(PyValueError::new_err("expected the full model form")),
        }
    }

    /// Unit-variance, equicorrelated covariance with means `±a·1` scaled to squared distance `delta2`.
    #[staticmethod]
    #[pyo3(signature = (p, rho, delta2, prior_offset, nu, n0, n1, alpha0 = 0.5))]
    #[allow(clippy::too_many_arguments)]
    fn equal_element_means(
        p: usize,
        rho: f64,
        delta2: f64,
        prior_offset: f64,
        nu: f64,
        n0: u32,
        n1: u32,
        alpha0: f64,
    ) -> PyResult<Self> {
        core::FullModelSpec::equal_element_means(p, rho, delta2, prior_offset, nu, n0, n1, alpha0)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.0.threshold()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn reduce_conditional(&self) -> PyResult<PyReducedConditional> {
        core::reduce_conditional(&self.0).map(PyReducedConditional).map_err(to_py)
    }

    fn reduce_unconditional(&self) -> PyResult<PyReducedUnconditional> {
        core::reduce_unconditional(&self.0).map(PyReducedUnconditional).map_err(to_py)
    }

    /// Seeded Monte Carlo estimates, returned as a nested dict.
    #[pyo3(signature = (mode, t1, t2 = 1, seed = 0, sampler = "sample_means", threads = None))]
    #[allow(clippy::too_many_arguments)]
    fn monte_carlo<'py>(
        &self,
        py: Python<'py>,
        mode: &str,
        t1: u64,
        t2: u64,
        seed: u64,
        sampler: &str,
        threads: Option<usize>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let sampler = match sampler {
            "sample_means" => core::Sampler::SampleMeans,
            "full_sample" => core::Sampler::FullSample,
            other => return Err(PyValueError::new_err(format!("unknown sampler `{other}`"))),
        };
        let config = core::McConfig { mode: parse_mode(mode)?, t1, t2, seed, spec: self.0.clone(), sampler };
        let est = py
            .detach(|| match threads {
                Some(k) => core::mc::run_with_threads(&config, k),
                None => core::mc::run(&config),
            })
            .map_err(to_py)?;
        json_to_py(py, &est)
    }
}

#[pyfunction]
fn std_normal_cdf(x: f64) -> PyResult<f64> {
    core::std_normal_cdf(x).map_err(to_py)
}

#[pyfunction]
fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> PyResult<f64> {
    core::bivariate_normal_cdf(a, b, core::Correlation::new(rho).map_err(to_py)?).map_err(to_py)
}

/// Worst-case RMS at total sample size `n`.
#[pyfunction]
fn kappa(n: u32, p: u32, beta: f64, mode: &str) -> PyResult<f64> {
    core::kappa(n, p, beta, parse_mode(mode)?).map_err(to_py)
}

/// Minimum even sample size with RMS below `tau`, or `None` when `n_max` is reached.
#[pyfunction]
#[pyo3(signature = (mode, p, beta, tau, n_max = 10_000, rule = "safe", horizon = core::planner::DEFAULT_HORIZON))]
fn min_n(mode: &str, p: u32, beta: f64, tau: f64, n_max: u32, rule: &str, horizon: u32) -> PyResult<Option<u32>> {
    let query = core::PlanQuery { mode: parse_mode(mode)?, p, beta, tau, n_max, rule: parse_rule(rule, horizon)? };
    core::min_n(&query).map(|r| r.n_min).map_err(to_py)
}

/// Minimum sample sizes over all `(tau, p)` pairs, as a list of dicts.
#[pyfunction]
#[pyo3(signature = (mode, beta, taus, ps, n_max = 10_000, rule = "safe", horizon = core::planner::DEFAULT_HORIZON))]
#[allow(clippy::too_many_arguments)]
fn plan_grid<'py>(
    py: Python<'py>,
    mode: &str,
    beta: f64,
    taus: Vec<f64>,
    ps: Vec<u32>,
    n_max: u32,
    rule: &str,
    horizon: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let (mode, rule) = (parse_mode(mode)?, parse_rule(rule, horizon)?);
    let cells = py.detach(|| core::plan_grid(mode, beta, &taus, &ps, n_max, rule)).map_err(to_py)?;
    json_to_py(py, &cells)
}

#[pymodule]
#[pyo3(name = "errmoments")]
pub fn errmoments_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("InconsistentMomentsError", m.py().get_type::<InconsistentMomentsError>())?;
    m.add_class::<PyMomentMatrix>()?;
    m.add_class::<PyReducedConditional>()?;
    m.add_class::<PyReducedUnconditional>()?;
    m.add_class::<PyFullModelSpec>()?;
    m.add_function(wrap_pyfunction!(std_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(bivariate_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(min_n, m)?)?;
    m.add_function(wrap_pyfunction!(plan_grid, m)?)?;
    Ok(())
}
