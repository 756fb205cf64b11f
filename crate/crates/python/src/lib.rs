//! Python bindings: the `lsd` extension module.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyString;

use lsd_core::asymptotics::{self, BaseLaw};
use lsd_core::estimation::empirical_frequencies;
use lsd_core::family::density_vector;
use lsd_core::sim::{render_report, run_simulation, ReportFormat, SimulationConfig};
use lsd_core::testing::{self, TestConfig};
use lsd_core::{DiscreteDensity, LsdError, Poisson, SearchConfig, DEFAULT_EPS_TAIL};

create_exception!(
    lsd,
    LsdException,
    PyException,
    "Raised for every lsd-core error."
);

fn to_py(e: LsdError) -> PyErr {
    LsdException::new_err(format!("[{}] {e}", e.kind()))
}

/// Serializes through JSON into plain Python dicts and lists.
fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| to_py(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn density(mass: Vec<f64>, offset: i64) -> PyResult<DiscreteDensity> {
    DiscreteDensity::new(offset, mass, 0.0).map_err(to_py)
}

/// The tilt pair `(beta, gamma)` and its derived exponents.
#[pyclass(frozen, skip_from_py_object, name = "TiltParams")]
pub struct PyTiltParams(lsd_core::TiltParams);

#[pymethods]
impl PyTiltParams {
    #[new]
    fn new(beta: f64, gamma: f64) -> PyResult<Self> {
        lsd_core::TiltParams::new(beta, gamma)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn exp_a(&self) -> f64 {
        self.0.exp_a()
    }

    #[getter]
    fn exp_b(&self) -> f64 {
        self.0.exp_b()
    }

    fn __repr__(&self) -> String {
        format!(
            "TiltParams(beta={}, gamma={})",
            self.0.beta(),
            self.0.gamma()
        )
    }
}

#[pyclass(frozen, get_all, name = "EstimatorResult")]
pub struct PyEstimatorResult {
    theta_hat: f64,
    objective: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    bracket: (f64, f64),
}

#[pymethods]
impl PyEstimatorResult {
    fn __repr__(&self) -> String {
        format!(
            "EstimatorResult(theta_hat={}, converged={}, iterations={})",
            self.theta_hat, self.converged, self.iterations
        )
    }
}

/// LSD between two mass vectors that start at `offset`.
#[pyfunction]
#[pyo3(name = "lsd", signature = (g, f, params, offset = 0))]
fn lsd_divergence(g: Vec<f64>, f: Vec<f64>, params: &PyTiltParams, offset: i64) -> PyResult<f64> {
    lsd_core::lsd(&density(g, offset)?, &density(f, offset)?, &params.0).map_err(to_py)
}

/// Generalized S-divergence between two mass vectors.
#[pyfunction]
#[pyo3(signature = (g, f, params, offset = 0))]
fn gsd(g: Vec<f64>, f: Vec<f64>, params: &PyTiltParams, offset: i64) -> PyResult<f64> {
    lsd_core::gsd(&density(g, offset)?, &density(f, offset)?, &params.0).map_err(to_py)
}

/// Poisson(theta) probabilities from 0 up to the tail cut.
#[pyfunction]
#[pyo3(signature = (theta, eps_tail = DEFAULT_EPS_TAIL))]
fn poisson_pmf(theta: f64, eps_tail: f64) -> PyResult<Vec<f64>> {
    let d = density_vector(&Poisson, theta, eps_tail).map_err(to_py)?;
    Ok((0..d.end()).map(|x| d.at(x)).collect())
}

/// Minimum-LSD estimate of the Poisson mean from a sample of counts.
#[pyfunction]
#[pyo3(signature = (sample, params, bracket = None))]
fn estimate(
    sample: Vec<i64>,
    params: &PyTiltParams,
    bracket: Option<(f64, f64)>,
) -> PyResult<PyEstimatorResult> {
    let r = empirical_frequencies(&sample).map_err(to_py)?;
    let config = SearchConfig {
        bracket,
        ..SearchConfig::default()
    };
    let fit = lsd_core::minimize_lsd(&r, &Poisson, &params.0, &config).map_err(to_py)?;
    Ok(PyEstimatorResult {
        theta_hat: fit.theta_hat,
        objective: fit.objective,
        residual: fit.residual,
        iterations: fit.iterations,
        converged: fit.converged,
        bracket: fit.bracket,
    })
}

/// First-order influence function at the Poisson(theta) model.
#[pyfunction]
fn influence_first(y: i64, theta: f64, params: &PyTiltParams) -> PyResult<f64> {
    asymptotics::if_first_order(
        y,
        BaseLaw::Model,
        &Poisson,
        theta,
        &params.0,
        DEFAULT_EPS_TAIL,
    )
    .map_err(to_py)
}

/// Second-order influence function at the Poisson(theta) model.
#[pyfunction]
fn influence_second(y: i64, theta: f64, params: &PyTiltParams) -> PyResult<f64> {
    asymptotics::if_second_order(y, &Poisson, theta, &params.0, DEFAULT_EPS_TAIL).map_err(to_py)
}

/// First- and second-order bias approximations as a dict of lists.
#[pyfunction]
fn bias_curves<'py>(
    py: Python<'py>,
    y: i64,
    theta: f64,
    params: &PyTiltParams,
    eps_grid: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let c = asymptotics::bias_curves(y, &Poisson, theta, &params.0, &eps_grid, DEFAULT_EPS_TAIL)
        .map_err(to_py)?;
    to_python(py, &c)
}

/// J, K, xi and the sandwich variance at the Poisson(theta) model.
#[pyfunction]
fn model_sandwich<'py>(py: Python<'py>, theta: f64, beta: f64) -> PyResult<Bound<'py, PyAny>> {
    let s = asymptotics::model_jkxi(&Poisson, theta, beta, DEFAULT_EPS_TAIL).map_err(to_py)?;
    to_python(py, &s)
}

/// One-sample test of `H0: theta = theta0`.
#[pyfunction]
#[pyo3(signature = (sample, theta0, params, seed = None))]
fn one_sample_test<'py>(
    py: Python<'py>,
    sample: Vec<i64>,
    theta0: f64,
    params: &PyTiltParams,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = TestConfig::default();
    if let Some(s) = seed {
        config.seed = s;
    }
    let r =
        testing::one_sample_test(&sample, &Poisson, theta0, &params.0, &config).map_err(to_py)?;
    to_python(py, &r)
}

/// Two-sample test of equal Poisson means.
#[pyfunction]
fn two_sample_test<'py>(
    py: Python<'py>,
    first: Vec<i64>,
    second: Vec<i64>,
    params: &PyTiltParams,
) -> PyResult<Bound<'py, PyAny>> {
    let r =
        testing::two_sample_statistic(&first, &second, &Poisson, &params.0, &TestConfig::default())
            .map_err(to_py)?;
    to_python(py, &r)
}

fn parse_config(py: Python<'_>, config: Option<&Bound<'_, PyAny>>) -> PyResult<SimulationConfig> {
    let Some(config) = config else {
        return Ok(SimulationConfig::default());
    };
    let text: String = if config.is_instance_of::<PyString>() {
        config.extract()?
    } else {
        py.import("json")?
            .call_method1("dumps", (config,))?
            .extract()?
    };
    let parsed: SimulationConfig = serde_json::from_str(&text).map_err(|e| to_py(e.into()))?;
    parsed.validate().map_err(to_py)?;
    Ok(parsed)
}

/// Runs a simulation. `config` is a dict or JSON string with
/// SimulationConfig fields; the result mirrors the JSON report.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn simulate<'py>(
    py: Python<'py>,
    config: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let config = parse_config(py, config)?;
    let report = py.detach(|| run_simulation(&config)).map_err(to_py)?;
    to_python(py, &report)
}

/// Same as `simulate`, rendered as the CSV report.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn simulate_csv(py: Python<'_>, config: Option<&Bound<'_, PyAny>>) -> PyResult<String> {
    let config = parse_config(py, config)?;
    let report = py.detach(|| run_simulation(&config)).map_err(to_py)?;
    render_report(&report, ReportFormat::Csv).map_err(to_py)
}

#[pymodule]
pub mod lsd {
    #[pymodule_export]
    use super::{
        bias_curves, estimate, gsd, influence_first, influence_second, lsd_divergence,
        model_sandwich, one_sample_test, poisson_pmf, simulate, simulate_csv, two_sample_test,
        LsdException, PyEstimatorResult, PyTiltParams,
    };
}
