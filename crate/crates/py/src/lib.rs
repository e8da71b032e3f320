//! Python bindings, importable as `entropy_roofline`.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::Serialize;

use entropy_roofline as core;
use entropy_roofline::distribution_shaping::ShapingPipelineSpec;
use entropy_roofline::entropy_sources::NonidealitySpec;
use entropy_roofline::fidelity::{FidelityConfig, PipelineStream, SampleStream, TargetSpec};
use entropy_roofline::probabilistic_memory::{self as pm, BackendConfig, BackendKind};
use entropy_roofline::simulator::{self, Mode, SimConfig, SweepGrid};

fn py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(m) => PyIOError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => u.into_bound_py_any(py),
            (_, Some(i)) => i.into_bound_py_any(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

/// Compute and access rates of one architecture.
#[pyclass(name = "ArchParams", module = "entropy_roofline", from_py_object)]
#[derive(Clone)]
struct PyArch {
    inner: core::ArchParams,
}

#[pymethods]
impl PyArch {
    #[new]
    #[pyo3(signature = (pi=1e13, beta_data=2.5e10, beta_rand=1e9, bytes_per_element=4))]
    fn new(pi: f64, beta_data: f64, beta_rand: f64, bytes_per_element: u32) -> PyResult<Self> {
        let inner = core::ArchParams {
            pi,
            beta_data,
            beta_rand,
            bytes_per_element,
        };
        inner.validate().map_err(py_err)?;
        Ok(PyArch { inner })
    }

    #[getter]
    fn pi(&self) -> f64 {
        self.inner.pi
    }

    #[getter]
    fn beta_data(&self) -> f64 {
        self.inner.beta_data
    }

    #[getter]
    fn beta_rand(&self) -> f64 {
        self.inner.beta_rand
    }

    fn effective_beta(&self, alpha: f64) -> PyResult<f64> {
        core::effective_beta(alpha, &self.inner).map_err(py_err)
    }

    fn system_throughput(&self, ai: f64, alpha: f64) -> PyResult<f64> {
        core::system_throughput(ai, alpha, &self.inner).map_err(py_err)
    }

    fn classify_regime(&self, ai: f64, alpha: f64) -> PyResult<&'static str> {
        core::classify_regime(ai, alpha, &self.inner)
            .map(|r| r.as_str())
            .map_err(py_err)
    }

    fn crossover_alpha(&self, ai: f64) -> PyResult<Option<f64>> {
        core::crossover_alpha(ai, &self.inner).map_err(py_err)
    }

    fn bandwidth_compression(&self, alpha: f64) -> PyResult<f64> {
        core::bandwidth_compression(alpha, &self.inner).map_err(py_err)
    }

    /// List of `(alpha, ai, beta_eff, phi, regime)` tuples.
    fn roofline_curve(
        &self,
        alpha: f64,
        ai_min: f64,
        ai_max: f64,
        n_points: usize,
    ) -> PyResult<Vec<(f64, f64, f64, f64, &'static str)>> {
        let pts = core::roofline_curve(&self.inner, alpha, ai_min, ai_max, n_points).map_err(py_err)?;
        Ok(pts
            .into_iter()
            .map(|p| (p.alpha, p.ai, p.beta_eff, p.phi, p.regime.as_str()))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "ArchParams(pi={}, beta_data={}, beta_rand={})",
            self.inner.pi, self.inner.beta_data, self.inner.beta_rand
        )
    }
}

#[pyclass(name = "Workload", module = "entropy_roofline", from_py_object)]
#[derive(Clone)]
struct PyWorkload {
    inner: core::WorkloadSpec,
}

#[pymethods]
impl PyWorkload {
    #[new]
    fn new(name: String, n_ops: u64, det_accesses: u64, stoch_accesses: u64) -> Self {
        PyWorkload {
            inner: core::WorkloadSpec::new(name, n_ops, det_accesses, stoch_accesses),
        }
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n_ops(&self) -> u64 {
        self.inner.n_ops
    }

    #[getter]
    fn det_accesses(&self) -> u64 {
        self.inner.det_accesses
    }

    #[getter]
    fn stoch_accesses(&self) -> u64 {
        self.inner.stoch_accesses
    }

    #[getter]
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha()
    }

    #[getter]
    fn ai(&self) -> Option<f64> {
        self.inner.ai()
    }

    fn __repr__(&self) -> String {
        let w = &self.inner;
        format!(
            "Workload({:?}, n_ops={}, det_accesses={}, stoch_accesses={})",
            w.name, w.n_ops, w.det_accesses, w.stoch_accesses
        )
    }
}

fn wrap(w: core::Result<core::WorkloadSpec>) -> PyResult<PyWorkload> {
    w.map(|inner| PyWorkload { inner }).map_err(py_err)
}

#[pyfunction]
fn bnn_layer(n_in: u64, n_out: u64, batch: u64) -> PyResult<PyWorkload> {
    wrap(core::workload::bnn_layer(n_in, n_out, batch))
}

#[pyfunction]
#[pyo3(signature = (c_in, c_out, k, h, w, batch, stochastic_weights=false))]
fn conv_layer(c_in: u64, c_out: u64, k: u64, h: u64, w: u64, batch: u64, stochastic_weights: bool) -> PyResult<PyWorkload> {
    wrap(core::workload::conv_layer(c_in, c_out, k, h, w, batch, stochastic_weights))
}

#[pyfunction]
fn mc_estimator(n_samples: u64, ops_per_sample: u64) -> PyResult<PyWorkload> {
    wrap(core::workload::mc_estimator(n_samples, ops_per_sample))
}

#[pyfunction]
fn parse_workload(text: &str) -> PyResult<PyWorkload> {
    wrap(core::workload::parse_workload(text))
}

fn backend_from_name(name: &str) -> PyResult<BackendConfig> {
    BackendKind::from_name(name)
        .map(BackendConfig::new)
        .ok_or_else(|| PyValueError::new_err(format!("unknown backend '{name}'")))
}

fn mode_from_name(name: &str) -> PyResult<Mode> {
    Mode::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown mode '{name}'")))
}

/// Runs one workload and returns the result as a dict.
#[pyfunction]
#[pyo3(signature = (workload, backend="von-neumann", mode="serialized", arch=None, seed=0))]
fn simulate<'py>(
    py: Python<'py>,
    workload: &PyWorkload,
    backend: &str,
    mode: &str,
    arch: Option<PyArch>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let config = SimConfig {
        arch: arch.map(|a| a.inner).unwrap_or_default(),
        backend: backend_from_name(backend)?,
        mode: mode_from_name(mode)?,
        shaping: ShapingPipelineSpec::default(),
        seed,
    };
    let r = simulator::run(&workload.inner, &config).map_err(py_err)?;
    to_py(py, &r)
}

/// `(beta_data_eff, beta_rand_eff)` for a backend.
#[pyfunction]
#[pyo3(signature = (backend="von-neumann", arch=None))]
fn backend_effective_rates(backend: &str, arch: Option<PyArch>) -> PyResult<(f64, f64)> {
    let config = SimConfig {
        arch: arch.map(|a| a.inner).unwrap_or_default(),
        backend: backend_from_name(backend)?,
        ..Default::default()
    };
    Ok(simulator::backend_effective_rates(&config))
}

/// Runs a sweep described by a JSON grid and returns the CSV table.
#[pyfunction]
#[pyo3(signature = (grid_json, config_json=None, jobs=1))]
fn sweep(grid_json: &str, config_json: Option<&str>, jobs: usize) -> PyResult<String> {
    let doc = match config_json {
        Some(text) => core::ConfigDocument::from_json(text).map_err(py_err)?,
        None => core::ConfigDocument::default(),
    };
    let grid = SweepGrid::from_json(grid_json).map_err(py_err)?;
    let rows = simulator::sweep(&doc.sim_config(), &grid, jobs).map_err(py_err)?;
    let mut buf = Vec::new();
    simulator::write_sweep_csv(&mut buf, &rows).map_err(py_err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn box_muller(u1: f64, u2: f64) -> PyResult<(f64, f64)> {
    core::distribution_shaping::box_muller(u1, u2).map_err(py_err)
}

#[pyfunction]
fn reparameterize(mu: f64, sigma: f64, eps: f64) -> PyResult<f64> {
    core::distribution_shaping::reparameterize(mu, sigma, eps).map_err(py_err)
}

#[pyfunction]
fn bernoulli_from_uniform(u: f64, p: f64) -> PyResult<u8> {
    core::distribution_shaping::bernoulli_from_uniform(u, p).map_err(py_err)
}

#[pyfunction]
fn pelgrom_sigma(sigma0: f64, area_wl: f64) -> PyResult<f64> {
    core::entropy_sources::pelgrom_sigma(sigma0, area_wl).map_err(py_err)
}

#[pyfunction]
fn thermal_sigma(temperature: f64, capacitance: f64) -> PyResult<f64> {
    core::entropy_sources::thermal_sigma(temperature, capacitance).map_err(py_err)
}

#[pyfunction]
fn ks_critical_value(n: usize, significance: f64) -> PyResult<f64> {
    core::fidelity::ks_critical_value(n, significance).map_err(py_err)
}

/// Draws `n` Box-Muller samples with optional bias, lag-1 correlation and
/// drift.
#[pyfunction]
#[pyo3(signature = (n, seed=0, bias=0.0, rho=0.0, drift=0.0))]
fn pipeline_samples(n: usize, seed: u64, bias: f64, rho: f64, drift: f64) -> PyResult<Vec<f64>> {
    let ni = NonidealitySpec { bias, rho, drift };
    let mut s = PipelineStream::new(&ShapingPipelineSpec::default(), ni, seed, 0).map_err(py_err)?;
    Ok((0..n).map(|_| s.next_sample()).collect())
}

fn parse_target(target: &str, params: &[f64]) -> PyResult<TargetSpec> {
    let t = match (target, params) {
        ("normal", []) => TargetSpec::standard_normal(),
        ("normal", &[mu, sigma]) => TargetSpec::Normal { mu, sigma },
        ("uniform", &[lo, hi]) => TargetSpec::Uniform { lo, hi },
        ("bernoulli", &[p]) => TargetSpec::Bernoulli { p },
        _ => return Err(PyValueError::new_err(format!("bad target {target} {params:?}"))),
    };
    t.validate().map_err(py_err)?;
    Ok(t)
}

/// Fidelity statistics of `samples` against a target distribution.
#[pyfunction]
#[pyo3(signature = (samples, target="normal", params=Vec::new()))]
fn fidelity_report<'py>(
    py: Python<'py>,
    samples: Vec<f64>,
    target: &str,
    params: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let target = parse_target(target, &params)?;
    let r = core::fidelity::report_from_samples(&samples, target, &FidelityConfig::default(), None)
        .map_err(py_err)?;
    to_py(py, &r)
}

/// Seeded entropy for memory sampling.
#[pyclass(name = "EntropyStream", module = "entropy_roofline")]
struct PyEntropyStream {
    inner: pm::EntropyStream,
}

#[pymethods]
impl PyEntropyStream {
    #[new]
    #[pyo3(signature = (seed=0, stream_id=0))]
    fn new(seed: u64, stream_id: u64) -> Self {
        PyEntropyStream {
            inner: pm::EntropyStream::new(seed, stream_id),
        }
    }
}

/// A probabilistic memory array.
#[pyclass(name = "PMemArray", module = "entropy_roofline")]
struct PyPMemArray {
    inner: pm::PMemArray,
}

#[pymethods]
impl PyPMemArray {
    #[new]
    #[pyo3(signature = (rows, cols, backend="von-neumann"))]
    fn new(rows: usize, cols: usize, backend: &str) -> PyResult<Self> {
        let inner = pm::PMemArray::new(rows, cols, backend_from_name(backend)?).map_err(py_err)?;
        Ok(PyPMemArray { inner })
    }

    fn write(&mut self, row: usize, col: usize, value: f64) -> PyResult<()> {
        self.inner
            .write((row, col), pm::CellState::Deterministic(value))
            .map_err(py_err)
    }

    fn write_gaussian(&mut self, row: usize, col: usize, mu: f64, sigma: f64) -> PyResult<()> {
        let s = pm::CellState::gaussian(mu, sigma).map_err(py_err)?;
        self.inner.write((row, col), s).map_err(py_err)
    }

    fn write_bernoulli(&mut self, row: usize, col: usize, p: f64) -> PyResult<()> {
        let d = pm::DistributionSpec::bernoulli(p).map_err(py_err)?;
        self.inner
            .write((row, col), pm::CellState::Distribution(d))
            .map_err(py_err)
    }

    fn read(&mut self, row: usize, col: usize) -> PyResult<f64> {
        self.inner.read((row, col)).map_err(py_err)
    }

    fn read_distribution<'py>(&mut self, py: Python<'py>, row: usize, col: usize) -> PyResult<Bound<'py, PyAny>> {
        let d = self.inner.read_distribution((row, col)).map_err(py_err)?;
        to_py(py, &d)
    }

    fn sample(&mut self, row: usize, col: usize, stream: &mut PyEntropyStream) -> PyResult<f64> {
        self.inner.sample((row, col), &mut stream.inner).map_err(py_err)
    }

    fn set_variance(&mut self, row: usize, col: usize, sigma: f64) -> PyResult<()> {
        self.inner.set_variance((row, col), sigma).map_err(py_err)
    }

    fn endurance(&self, row: usize, col: usize) -> PyResult<u64> {
        self.inner.endurance((row, col)).map_err(py_err)
    }

    fn cost_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.cost_report())
    }
}

#[pymodule]
#[pyo3(name = "entropy_roofline")]
fn entropy_roofline_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArch>()?;
    m.add_class::<PyWorkload>()?;
    m.add_class::<PyEntropyStream>()?;
    m.add_class::<PyPMemArray>()?;
    m.add_function(wrap_pyfunction!(bnn_layer, m)?)?;
    m.add_function(wrap_pyfunction!(conv_layer, m)?)?;
    m.add_function(wrap_pyfunction!(mc_estimator, m)?)?;
    m.add_function(wrap_pyfunction!(parse_workload, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(backend_effective_rates, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(box_muller, m)?)?;
    m.add_function(wrap_pyfunction!(reparameterize, m)?)?;
    m.add_function(wrap_pyfunction!(bernoulli_from_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(pelgrom_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(ks_critical_value, m)?)?;
    m.add_function(wrap_pyfunction!(pipeline_samples, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_report, m)?)?;
    Ok(())
}
