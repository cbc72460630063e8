//! Python bindings: the forward model, synthetic data, the online
//! optimizers, regret evaluation and the confidence-interval layer.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use source_trace::ade::{self, Observation as CoreObservation, RiverParams as CoreRiver, SourceEstimate};
use source_trace::error::Error;
use source_trace::evaluation::{offline_oracle, OracleConfig};
use source_trace::io::{self, ExperimentConfig, ScenarioConfig};
use source_trace::optimizers::{self, Algorithm, RunConfig};
use source_trace::planning;

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 | 3 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "RiverParams", module = "source_trace_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyRiver(CoreRiver);

#[pymethods]
impl PyRiver {
    #[new]
    #[pyo3(signature = (cross_section_area, dispersion, velocity, decay = 0.0, unit_factor = 1.0))]
    fn new(cross_section_area: f64, dispersion: f64, velocity: f64, decay: f64, unit_factor: f64) -> PyResult<Self> {
        let p = CoreRiver {
            cross_section_area,
            dispersion,
            velocity,
            decay,
            unit_factor,
        };
        p.validate().map_err(to_py)?;
        Ok(PyRiver(p))
    }

    /// The Truckee-like reach used by the synthetic benchmarks.
    #[staticmethod]
    fn truckee() -> Self {
        PyRiver(CoreRiver::truckee())
    }

    #[getter]
    fn velocity(&self) -> f64 {
        self.0.velocity
    }

    #[getter]
    fn dispersion(&self) -> f64 {
        self.0.dispersion
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "Observation", module = "source_trace_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyObservation(CoreObservation);

#[pymethods]
impl PyObservation {
    #[new]
    fn new(sensor_id: u32, sensor_location: f64, sample_time: f64, concentration: f64) -> Self {
        PyObservation(CoreObservation {
            sensor_id,
            sensor_location,
            sample_time,
            concentration,
        })
    }

    #[getter]
    fn sensor_id(&self) -> u32 {
        self.0.sensor_id
    }
    #[getter]
    fn sensor_location(&self) -> f64 {
        self.0.sensor_location
    }
    #[getter]
    fn sample_time(&self) -> f64 {
        self.0.sample_time
    }
    #[getter]
    fn concentration(&self) -> f64 {
        self.0.concentration
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

fn unwrap_obs(obs: &[PyObservation]) -> Vec<CoreObservation> {
    obs.iter().map(|o| o.0).collect()
}

/// Concentration at `(location, time)` from a source `(s, l, t)`.
#[pyfunction]
fn concentration(source: (f64, f64, f64), location: f64, time: f64, river: &PyRiver) -> PyResult<f64> {
    let src = SourceEstimate::new(source.0, source.1, source.2);
    ade::ade_concentration(&src, location, time, &river.0).map_err(to_py)
}

/// Gradient of the squared residual of one observation.
#[pyfunction]
fn loss_gradient(source: (f64, f64, f64), obs: &PyObservation, river: &PyRiver) -> PyResult<(f64, f64, f64)> {
    let src = SourceEstimate::new(source.0, source.1, source.2);
    let g = ade::loss_gradient(&src, &obs.0, &river.0).map_err(to_py)?;
    Ok((g[0], g[1], g[2]))
}

/// JSON of the default experiment configuration on the Truckee scenario.
#[pyfunction]
#[pyo3(signature = (samples = 200))]
fn default_config(samples: usize) -> String {
    ExperimentConfig {
        scenario: ScenarioConfig::truckee(samples),
        run: RunConfig::default(),
        oracle: OracleConfig::default(),
        plan: None,
        bench: None,
    }
    .to_json()
}

/// Synthetic stream described by an experiment configuration (JSON).
#[pyfunction]
fn simulate(config_json: &str) -> PyResult<Vec<PyObservation>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let obs = io::generate_synthetic(&cfg.scenario).map_err(to_py)?;
    Ok(obs.into_iter().map(PyObservation).collect())
}

#[pyfunction]
fn load_observations(text: &str) -> PyResult<Vec<PyObservation>> {
    Ok(io::load_observations(text)
        .map_err(to_py)?
        .into_iter()
        .map(PyObservation)
        .collect())
}

#[pyfunction]
#[pyo3(signature = (observations, manifest = None))]
fn write_observations(observations: Vec<PyObservation>, manifest: Option<&str>) -> String {
    io::write_observations(&unwrap_obs(&observations), manifest)
}

/// Outcome of an online run.
#[pyclass(name = "RunResult", module = "source_trace_py", frozen)]
struct PyRunResult {
    #[pyo3(get)]
    algorithm: String,
    #[pyo3(get)]
    final_estimate: (f64, f64, f64),
    /// Played points, one per observation.
    #[pyo3(get)]
    points: Vec<(f64, f64, f64)>,
    #[pyo3(get)]
    losses: Vec<f64>,
    #[pyo3(get)]
    inner_steps: u64,
    #[pyo3(get)]
    local_regret: f64,
    /// The trace in the CSV file format.
    #[pyo3(get)]
    trace_csv: String,
}

/// Runs `algo` (tgd, atgd, aptgd, mtgd, mptgd) over `observations` with the
/// box, river and run settings of `config_json`.
#[pyfunction]
fn identify(py: Python<'_>, algo: &str, observations: Vec<PyObservation>, config_json: &str) -> PyResult<PyRunResult> {
    let algorithm: Algorithm = algo.parse().map_err(to_py)?;
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let obs = unwrap_obs(&observations);
    let trace = py
        .detach(|| {
            optimizers::run(algorithm, &obs, &cfg.scenario.feasible_box, &cfg.scenario.river, &cfg.run)
        })
        .map_err(to_py)?;
    let f = trace.final_estimate;
    Ok(PyRunResult {
        algorithm: algorithm.to_string(),
        final_estimate: (f[0], f[1], f[2]),
        points: trace.records.iter().map(|r| (r.x[0], r.x[1], r.x[2])).collect(),
        losses: trace.records.iter().map(|r| r.loss).collect(),
        inner_steps: trace.total_inner_steps(),
        local_regret: trace.local_regret(),
        trace_csv: io::write_trace(&io::TraceFile::from_trace(&trace, None)),
    })
}

/// Best point `(s, l, t)` and value of the summed loss over `observations`.
#[pyfunction]
#[pyo3(signature = (observations, config_json, grid = None))]
fn oracle(
    py: Python<'_>,
    observations: Vec<PyObservation>,
    config_json: &str,
    grid: Option<usize>,
) -> PyResult<((f64, f64, f64), f64)> {
    let mut cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    if let Some(k) = grid {
        cfg.oracle.grid = k;
    }
    let obs = unwrap_obs(&observations);
    let o = py
        .detach(|| offline_oracle(&obs, &cfg.scenario.feasible_box, &cfg.scenario.river, &cfg.oracle))
        .map_err(to_py)?;
    Ok(((o.argmin.mass, o.argmin.location, o.argmin.release_time), o.value))
}

/// Two-sided upper quantile `t_{alpha/2, dof}`.
#[pyfunction]
fn t_quantile(alpha: f64, dof: u64) -> PyResult<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || dof == 0 {
        return Err(PyValueError::new_err("need 0 < alpha < 1 and dof >= 1"));
    }
    Ok(planning::t_quantile(alpha, dof))
}

/// `(lower, upper)` t-interval for the mean of `samples`.
#[pyfunction]
fn confidence_interval(samples: Vec<f64>, alpha: f64) -> PyResult<(f64, f64)> {
    let ci = planning::confidence_interval(&samples, alpha).map_err(to_py)?;
    Ok((ci.lower, ci.upper))
}

#[pymodule]
fn source_trace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRiver>()?;
    m.add_class::<PyObservation>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(concentration, m)?)?;
    m.add_function(wrap_pyfunction!(loss_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(load_observations, m)?)?;
    m.add_function(wrap_pyfunction!(write_observations, m)?)?;
    m.add_function(wrap_pyfunction!(identify, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(t_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_interval, m)?)?;
    Ok(())
}
