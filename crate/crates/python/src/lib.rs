//! Python bindings for `qgarch-core`.
//!
//! Return series cross the boundary as plain `list[float]`; they are
//! demeaned on the way in, like every series the core works with.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qgarch_core::data::{PriceSeries, ReturnSeries};
use qgarch_core::diagnostics::{self, SummaryOptions};
use qgarch_core::model::{self, ModelKind, ModelParams};
use qgarch_core::proposal::{self, MomentEstimate};
use qgarch_core::rng::stream_rng;
use qgarch_core::sampler::{self, ChainConfig, Sigma1Policy};
use qgarch_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::DegenerateSeries | Error::NonConvergence(_) | Error::DegenerateCovariance { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn returns(values: Vec<f64>) -> PyResult<ReturnSeries> {
    ReturnSeries::from_raw(values).map_err(py_err)
}

fn parse_kind(kind: &str) -> PyResult<ModelKind> {
    kind.parse().map_err(py_err)
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (omega, alpha, beta, gamma=0.0, kind="qgarch"))]
    fn new(omega: f64, alpha: f64, beta: f64, gamma: f64, kind: &str) -> PyResult<Self> {
        let inner = match parse_kind(kind)? {
            ModelKind::Garch => ModelParams { gamma, ..ModelParams::garch(omega, alpha, beta) },
            ModelKind::Qgarch => ModelParams::qgarch(omega, alpha, beta, gamma),
        };
        Ok(PyModelParams { inner })
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    fn in_support(&self) -> bool {
        self.inner.in_support()
    }

    fn unconditional_variance(&self) -> PyResult<f64> {
        model::unconditional_variance(&self.inner).map_err(py_err)
    }

    fn news_impact_curve(&self, grid: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        model::news_impact_curve(&self.inner, &grid).map_err(py_err)
    }

    fn volatility_path(&self, returns_: Vec<f64>, sigma1_sq: f64) -> PyResult<Vec<f64>> {
        let y = returns(returns_)?;
        Ok(model::volatility_path(&self.inner, &y, sigma1_sq).map_err(py_err)?.sigma_sq)
    }

    fn log_likelihood(&self, returns_: Vec<f64>, sigma1_sq: f64) -> PyResult<f64> {
        model::log_likelihood(&self.inner, &returns(returns_)?, sigma1_sq).map_err(py_err)
    }

    fn log_posterior(&self, returns_: Vec<f64>, sigma1_sq: f64) -> PyResult<f64> {
        Ok(model::log_posterior(&self.inner, &returns(returns_)?, sigma1_sq))
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(omega={}, alpha={}, beta={}, gamma={}, kind='{}')",
            p.omega, p.alpha, p.beta, p.gamma, p.kind
        )
    }
}

#[pyclass(name = "ProposalDensity")]
struct PyProposalDensity {
    inner: proposal::ProposalDensity,
}

#[pymethods]
impl PyProposalDensity {
    /// Fits the proposal to a list of sampled states.
    #[staticmethod]
    #[pyo3(signature = (samples, nu=10.0))]
    fn fit(samples: Vec<Vec<f64>>, nu: f64) -> PyResult<Self> {
        let m = proposal::estimate_moments(&samples).map_err(py_err)?;
        let inner = proposal::build_proposal(&m, nu).map_err(py_err)?;
        Ok(PyProposalDensity { inner })
    }

    /// Builds the proposal from a mean and a covariance `V` (row lists).
    #[staticmethod]
    #[pyo3(signature = (mean, covariance, nu=10.0))]
    fn from_moments(mean: Vec<f64>, covariance: Vec<Vec<f64>>, nu: f64) -> PyResult<Self> {
        let p = mean.len();
        if covariance.len() != p || covariance.iter().any(|r| r.len() != p) {
            return Err(PyValueError::new_err("covariance must be a p x p list of rows"));
        }
        let flat: Vec<f64> = covariance.into_iter().flatten().collect();
        let m = MomentEstimate {
            mean: qgarch_core::proposal::DVector::from_vec(mean),
            second_central: qgarch_core::proposal::DMatrix::from_row_slice(p, p, &flat),
        };
        let inner = proposal::build_proposal(&m, nu).map_err(py_err)?;
        Ok(PyProposalDensity { inner })
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.inner.snapshot().mean
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        self.inner.snapshot().sigma
    }

    #[getter]
    fn jitter(&self) -> f64 {
        self.inner.jitter()
    }

    #[pyo3(signature = (n, seed=0))]
    fn draw(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = stream_rng(seed, 0);
        (0..n).map(|_| self.inner.draw(&mut rng)).collect()
    }

    fn log_density(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.inner.log_density(&theta).map_err(py_err)
    }
}

#[pyclass(name = "ChainResult")]
struct PyChainResult {
    inner: sampler::ChainResult,
    returns: ReturnSeries,
}

#[pymethods]
impl PyChainResult {
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    #[getter]
    fn samples(&self) -> Vec<Vec<f64>> {
        self.inner.samples.clone()
    }

    #[getter]
    fn warmup_samples(&self) -> Vec<Vec<f64>> {
        self.inner.warmup_samples.clone()
    }

    #[getter]
    fn acceptance_trace(&self) -> Vec<f64> {
        self.inner.acceptance_trace.clone()
    }

    #[getter]
    fn sigma1_sq(&self) -> f64 {
        self.inner.sigma1_sq
    }

    fn acceptance_rate(&self) -> f64 {
        self.inner.acceptance_rate()
    }

    fn column(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.inner.dim() {
            return Err(PyValueError::new_err(format!("column {k} out of range")));
        }
        Ok(self.inner.column(k))
    }

    /// Proposal moment snapshots as a list of dicts.
    fn moment_trace<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.inner.moment_trace)
    }

    /// Posterior summary as a dict.
    #[pyo3(signature = (jackknife_blocks=diagnostics::DEFAULT_JACKKNIFE_BLOCKS))]
    fn summary<'py>(&self, py: Python<'py>, jackknife_blocks: usize) -> PyResult<Bound<'py, PyAny>> {
        let report = diagnostics::summarize_with(&self.inner, &self.returns, &SummaryOptions { jackknife_blocks })
            .map_err(py_err)?;
        json_to_py(py, &report)
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

#[pyfunction]
fn to_returns(prices: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = PriceSeries::new(prices, None).map_err(py_err)?;
    Ok(qgarch_core::to_returns(&p).values().to_vec())
}

#[pyfunction]
#[pyo3(signature = (params, n, sigma1_sq, seed=0))]
fn simulate_qgarch(params: &PyModelParams, n: usize, sigma1_sq: f64, seed: u64) -> PyResult<Vec<f64>> {
    Ok(qgarch_core::simulate_qgarch(&params.inner, n, sigma1_sq, seed)
        .map_err(py_err)?
        .values()
        .to_vec())
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (
    returns_, model="qgarch", seed=0, burn_in=5000, initial_pool=1000,
    update_interval=1000, samples=100_000, nu=10.0, freeze_after=None, sigma1_sq=None,
))]
fn run_adaptive(
    py: Python<'_>,
    returns_: Vec<f64>,
    model: &str,
    seed: u64,
    burn_in: usize,
    initial_pool: usize,
    update_interval: usize,
    samples: usize,
    nu: f64,
    freeze_after: Option<usize>,
    sigma1_sq: Option<f64>,
) -> PyResult<PyChainResult> {
    let y = returns(returns_)?;
    let config = ChainConfig {
        burn_in,
        initial_pool,
        update_interval,
        total_samples: samples,
        nu,
        freeze_after,
        sigma1_sq: sigma1_sq.map_or(Sigma1Policy::SampleVariance, Sigma1Policy::Explicit),
        ..ChainConfig::new(parse_kind(model)?, seed)
    };
    let inner = py
        .detach(|| sampler::run_adaptive(&config, &y))
        .map_err(py_err)?;
    Ok(PyChainResult { inner, returns: y })
}

#[pyfunction]
fn acf(series: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    diagnostics::acf(&series, max_lag).map_err(py_err)
}

/// Returns `(tau_int, error, window)`.
#[pyfunction]
fn integrated_autocorr_time(series: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let t = diagnostics::integrated_autocorr_time(&series).map_err(py_err)?;
    Ok((t.tau_int, t.error, t.window))
}

#[pyfunction]
#[pyo3(signature = (series, n_blocks=diagnostics::DEFAULT_JACKKNIFE_BLOCKS))]
fn jackknife_se(series: Vec<f64>, n_blocks: usize) -> PyResult<f64> {
    diagnostics::jackknife_se(&series, n_blocks).map_err(py_err)
}

#[pymodule]
fn qgarch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyProposalDensity>()?;
    m.add_class::<PyChainResult>()?;
    m.add_function(wrap_pyfunction!(to_returns, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_qgarch, m)?)?;
    m.add_function(wrap_pyfunction!(run_adaptive, m)?)?;
    m.add_function(wrap_pyfunction!(acf, m)?)?;
    m.add_function(wrap_pyfunction!(integrated_autocorr_time, m)?)?;
    m.add_function(wrap_pyfunction!(jackknife_se, m)?)?;
    Ok(())
}
