//! Python module `fusion`: data handling, the fiducial law of `rho`, chains,
//! diagnostics and reference curves.

use fusion_core::analysis::ReferenceCurve;
use fusion_core::sampler::{read_trace_csv, write_trace_csv};
use fusion_core::{
    compute_sufficient_stats, fiducial, reference, FusionError, ModelParams, ObservationSet, PriorSpec,
    SamplerConfig, ScanPolicy, Side, TruncPolicy, TruncationConfig,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn err(e: FusionError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => n.to_string().into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serde_to_py<'py, T: serde::Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn side(s: &str) -> PyResult<Side> {
    match s {
        "x" => Ok(Side::X),
        "y" => Ok(Side::Y),
        _ => Err(PyValueError::new_err(format!("side must be 'x' or 'y', got {s:?}"))),
    }
}

/// Paired observations `(x, y)`.
#[pyclass(name = "ObservationSet", module = "fusion", frozen)]
struct PyObservationSet {
    inner: ObservationSet,
}

#[pymethods]
impl PyObservationSet {
    #[new]
    fn new(pairs: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(Self { inner: ObservationSet::from_pairs(&pairs).map_err(err)? })
    }

    #[staticmethod]
    fn from_csv(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self { inner: ObservationSet::from_csv_path(path).map_err(err)? })
    }

    /// A dataset whose summary statistics equal the targets exactly.
    #[staticmethod]
    #[pyo3(signature = (n=reference::N, mean_x=0.0925, sd_x=1.053, mean_y=0.04, sd_y=0.866, corr=0.78, seed=0))]
    fn simulate(n: usize, mean_x: f64, sd_x: f64, mean_y: f64, sd_y: f64, corr: f64, seed: u64) -> PyResult<Self> {
        let m = fusion_core::SampleMoments { mean_x, mean_y, sd_x, sd_y, corr };
        Ok(Self { inner: fusion_core::synthesize_matching_dataset(n, &m, seed).map_err(err)? })
    }

    fn to_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(path)?;
        self.inner.write_csv(f).map_err(err)
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        self.inner.points().iter().map(|p| (p.x, p.y)).collect()
    }

    fn sufficient_stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serde_to_py(py, &compute_sufficient_stats(&self.inner))
    }

    fn moments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serde_to_py(py, &compute_sufficient_stats(&self.inner).moments())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "ModelParams", module = "fusion", frozen)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(mu_x: f64, mu_y: f64, sigma2_x: f64, sigma2_y: f64, rho: f64) -> PyResult<Self> {
        Ok(Self { inner: ModelParams::new(mu_x, mu_y, sigma2_x, sigma2_y, rho).map_err(err)? })
    }

    #[getter]
    fn mu_x(&self) -> f64 {
        self.inner.mu_x
    }
    #[getter]
    fn mu_y(&self) -> f64 {
        self.inner.mu_y
    }
    #[getter]
    fn sigma2_x(&self) -> f64 {
        self.inner.sigma2_x
    }
    #[getter]
    fn sigma2_y(&self) -> f64 {
        self.inner.sigma2_y
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    fn to_list(&self) -> [f64; 5] {
        self.inner.to_array()
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(mu_x={}, mu_y={}, sigma2_x={}, sigma2_y={}, rho={})",
            p.mu_x, p.mu_y, p.sigma2_x, p.sigma2_y, p.rho
        )
    }
}

#[pyclass(name = "PriorSpec", module = "fusion", frozen)]
struct PyPriorSpec {
    inner: PriorSpec,
}

#[pymethods]
impl PyPriorSpec {
    #[new]
    fn new(mu_x: f64, sd_x: f64, n_x: f64, mu_y: f64, sd_y: f64, n_y: f64) -> PyResult<Self> {
        Ok(Self { inner: PriorSpec::new(mu_x, sd_x, n_x, mu_y, sd_y, n_y).map_err(err)? })
    }

    /// Prior constants of the worked example.
    #[staticmethod]
    fn reference() -> Self {
        Self { inner: reference::prior() }
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serde_to_py(py, &self.inner)
    }
}

/// A kept run of the sampler.
#[pyclass(name = "ChainTrace", module = "fusion", frozen)]
struct PyChainTrace {
    states: Vec<ModelParams>,
    acceptance: Option<[f64; 5]>,
    seed: Option<u64>,
}

#[pymethods]
impl PyChainTrace {
    #[staticmethod]
    fn from_csv(path: std::path::PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(path)?;
        Ok(Self { states: read_trace_csv(f).map_err(err)?, acceptance: None, seed: None })
    }

    fn to_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(path)?;
        write_trace_csv(&self.states, f).map_err(err)
    }

    /// One column of the trace, by parameter name.
    fn values(&self, param: &str) -> PyResult<Vec<f64>> {
        let p: fusion_core::ParamId = param.parse().map_err(err)?;
        Ok(self.states.iter().map(|s| s.get(p)).collect())
    }

    /// Rows `[mu_x, mu_y, sigma2_x, sigma2_y, rho]`.
    fn rows(&self) -> Vec<[f64; 5]> {
        self.states.iter().map(ModelParams::to_array).collect()
    }

    #[getter]
    fn acceptance(&self) -> Option<[f64; 5]> {
        self.acceptance
    }

    #[getter]
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serde_to_py(py, &fusion_core::summarize(&self.states, self.acceptance).map_err(err)?)
    }

    fn __len__(&self) -> usize {
        self.states.len()
    }
}

impl PyChainTrace {
    fn from_trace(t: fusion_core::ChainTrace) -> Self {
        Self { seed: Some(t.config.seed), acceptance: Some(t.acceptance_rates), states: t.states }
    }
}

#[allow(clippy::too_many_arguments)]
fn sampler_config(
    iterations: usize,
    burn_in: usize,
    seed: u64,
    scan: &str,
    safety: Option<f64>,
    alpha: Option<f64>,
    adapt: bool,
) -> PyResult<SamplerConfig> {
    let trunc = match (safety, alpha) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("give at most one of safety and alpha")),
        (_, Some(a)) => TruncPolicy::Fixed(a),
        (Some(s), None) => TruncPolicy::Auto(s),
        (None, None) => TruncPolicy::default(),
    };
    let cfg = SamplerConfig {
        iterations,
        burn_in,
        seed,
        scan: scan.parse::<ScanPolicy>().map_err(err)?,
        trunc,
        adapt,
        ..SamplerConfig::default()
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Closed-form MLE of `rho` with the other four parameters held fixed.
#[pyfunction]
fn rho_mle(params: &PyModelParams, data: &PyObservationSet) -> PyResult<f64> {
    fusion_core::rho_mle(&params.inner, &compute_sufficient_stats(&data.inner)).map_err(err)
}

/// Largest truncation bound keeping the pivot invertible, times `safety`.
#[pyfunction]
#[pyo3(signature = (rho_hat, n, safety=fiducial::DEFAULT_SAFETY))]
fn max_alpha(rho_hat: f64, n: usize, safety: f64) -> PyResult<f64> {
    Ok(fusion_core::max_alpha(rho_hat, n, safety).map_err(err)?.alpha)
}

#[pyfunction]
fn rho_support(rho_hat: f64, n: usize, alpha: f64) -> PyResult<(f64, f64)> {
    let s = fusion_core::rho_support(rho_hat, n, TruncationConfig::new(alpha).map_err(err)?).map_err(err)?;
    Ok((s.rho_lo, s.rho_hi))
}

/// Density of the truncated fiducial law of `rho`; zero off its support.
#[pyfunction]
fn fiducial_density_rho(rho: Vec<f64>, rho_hat: f64, n: usize, alpha: f64) -> PyResult<Vec<f64>> {
    let law = fiducial::FiducialRho::new(rho_hat, n, TruncationConfig::new(alpha).map_err(err)?).map_err(err)?;
    Ok(rho.iter().map(|&r| law.pdf(r)).collect())
}

#[pyfunction]
#[pyo3(signature = (rho_hat, n, alpha, size, seed=0))]
fn sample_fiducial_rho(rho_hat: f64, n: usize, alpha: f64, size: usize, seed: u64) -> PyResult<Vec<f64>> {
    let law = fiducial::FiducialRho::new(rho_hat, n, TruncationConfig::new(alpha).map_err(err)?).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..size).map(|_| law.sample(&mut rng)).collect())
}

/// Runs one chain; starts from the sample moments unless `init` is given.
#[pyfunction]
#[pyo3(signature = (data, prior, init=None, iterations=200_000, burn_in=5_000, seed=0, scan="uniform",
                    safety=None, alpha=None, adapt=true))]
#[allow(clippy::too_many_arguments)]
fn run_chain(
    py: Python<'_>,
    data: &PyObservationSet,
    prior: &PyPriorSpec,
    init: Option<&PyModelParams>,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    scan: &str,
    safety: Option<f64>,
    alpha: Option<f64>,
    adapt: bool,
) -> PyResult<PyChainTrace> {
    let cfg = sampler_config(iterations, burn_in, seed, scan, safety, alpha, adapt)?;
    let init = match init {
        Some(p) => p.inner,
        None => ModelParams::from_moments(&compute_sufficient_stats(&data.inner).moments()).map_err(err)?,
    };
    let trace = py
        .detach(|| fusion_core::run_chain(&data.inner, &prior.inner, &init, &cfg))
        .map_err(err)?;
    Ok(PyChainTrace::from_trace(trace))
}

/// Runs `chains` chains from dispersed starts with seeds `seed + i`.
#[pyfunction]
#[pyo3(signature = (data, prior, chains=4, iterations=200_000, burn_in=5_000, seed=0, scan="uniform",
                    safety=None, alpha=None, adapt=true))]
#[allow(clippy::too_many_arguments)]
fn run_multi_chain(
    py: Python<'_>,
    data: &PyObservationSet,
    prior: &PyPriorSpec,
    chains: usize,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    scan: &str,
    safety: Option<f64>,
    alpha: Option<f64>,
    adapt: bool,
) -> PyResult<Vec<PyChainTrace>> {
    let cfg = sampler_config(iterations, burn_in, seed, scan, safety, alpha, adapt)?;
    let traces = py
        .detach(|| fusion_core::run_multi_chain(&data.inner, &prior.inner, &cfg, chains))
        .map_err(err)?;
    Ok(traces.into_iter().map(PyChainTrace::from_trace).collect())
}

#[pyfunction]
#[pyo3(signature = (chains, threshold=fusion_core::analysis::DEFAULT_PSRF_THRESHOLD))]
fn gelman_rubin<'py>(py: Python<'py>, chains: Vec<PyRef<'py, PyChainTrace>>, threshold: f64) -> PyResult<Bound<'py, PyAny>> {
    let views: Vec<&[ModelParams]> = chains.iter().map(|c| c.states.as_slice()).collect();
    serde_to_py(py, &fusion_core::gelman_rubin(&views, threshold).map_err(err)?)
}

/// Tabulates a reference density; returns `(abscissae, densities)`.
///
/// Kinds: `prior_mu`, `prior_sigma` (need `prior`, `side`), `fiducial_mu`
/// (`xbar`, `s`, `n`), `fiducial_sigma` (`s`, `n`), `confidence_rho` (`r`, `n`),
/// `fiducial_rho_conditional` (`rho_hat`, `n`, `alpha`), `normal_mean_fiducial`
/// (`xbar`, `sigma2`, `n`).
#[pyfunction]
#[pyo3(signature = (kind, *, prior=None, side="x", n=None, xbar=None, s=None, r=None, sigma2=None,
                    rho_hat=None, alpha=None, points=fusion_core::analysis::DEFAULT_GRID_POINTS))]
#[allow(clippy::too_many_arguments)]
fn reference_curve(
    kind: &str,
    prior: Option<&PyPriorSpec>,
    side: &str,
    n: Option<usize>,
    xbar: Option<f64>,
    s: Option<f64>,
    r: Option<f64>,
    sigma2: Option<f64>,
    rho_hat: Option<f64>,
    alpha: Option<f64>,
    points: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    fn need<T>(v: Option<T>, name: &str, kind: &str) -> PyResult<T> {
        v.ok_or_else(|| PyValueError::new_err(format!("{kind} needs `{name}`")))
    }
    let prior = prior.map(|p| p.inner).unwrap_or_else(reference::prior);
    let curve = match kind.replace('-', "_").as_str() {
        "prior_mu" => ReferenceCurve::PriorMu { prior, side: self::side(side)? },
        "prior_sigma" => ReferenceCurve::PriorSigma { prior, side: self::side(side)? },
        "fiducial_mu" => ReferenceCurve::FiducialMu {
            xbar: need(xbar, "xbar", kind)?,
            s: need(s, "s", kind)?,
            n: need(n, "n", kind)?,
        },
        "fiducial_sigma" => ReferenceCurve::FiducialSigma { s: need(s, "s", kind)?, n: need(n, "n", kind)? },
        "confidence_rho" => ReferenceCurve::ConfidenceRho { r: need(r, "r", kind)?, n: need(n, "n", kind)? },
        "fiducial_rho_conditional" => {
            let rho_hat = need(rho_hat, "rho_hat", kind)?;
            let n = need(n, "n", kind)?;
            let trunc = match alpha {
                Some(a) => TruncationConfig::new(a),
                None => fusion_core::max_alpha(rho_hat, n, fiducial::DEFAULT_SAFETY),
            }
            .map_err(err)?;
            ReferenceCurve::FiducialRhoConditional { rho_hat, n, trunc }
        }
        "normal_mean_fiducial" => ReferenceCurve::NormalMeanFiducial {
            xbar: need(xbar, "xbar", kind)?,
            sigma2: need(sigma2, "sigma2", kind)?,
            n: need(n, "n", kind)?,
        },
        other => return Err(PyValueError::new_err(format!("unknown curve kind {other:?}"))),
    };
    let c = curve.tabulate(points).map_err(err)?;
    Ok((c.abscissae, c.densities))
}

#[pymodule]
fn fusion(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyObservationSet>()?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyPriorSpec>()?;
    m.add_class::<PyChainTrace>()?;
    m.add_function(wrap_pyfunction!(rho_mle, m)?)?;
    m.add_function(wrap_pyfunction!(max_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(rho_support, m)?)?;
    m.add_function(wrap_pyfunction!(fiducial_density_rho, m)?)?;
    m.add_function(wrap_pyfunction!(sample_fiducial_rho, m)?)?;
    m.add_function(wrap_pyfunction!(run_chain, m)?)?;
    m.add_function(wrap_pyfunction!(run_multi_chain, m)?)?;
    m.add_function(wrap_pyfunction!(gelman_rubin, m)?)?;
    m.add_function(wrap_pyfunction!(reference_curve, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
