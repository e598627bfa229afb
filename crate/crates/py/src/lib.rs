//! Python bindings: scenario generation, the filter recursion, GOSPA
//! metrics, hypothesis counting and campaign execution.
//!
//! Measurements and states cross the boundary as plain lists of floats;
//! campaign results come back as JSON-compatible dictionaries.

use nalgebra::DVector;
use num_bigint::BigUint;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use tpmb::filter::{FilterParams, TpmbFilter, Variant};
use tpmb::harness::{run_campaign, CampaignConfig};
use tpmb::metrics::{gospa, MetricParams};
use tpmb::simulator::{
    generate_measurements, generate_truth, scenario1_config, scenario2_config, ScenarioConfig,
};
use tpmb::types::Trajectory;

fn to_py_err(e: tpmb::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vectors_from_py(rows: Vec<Vec<f64>>) -> Vec<DVector<f64>> {
    rows.into_iter().map(DVector::from_vec).collect()
}

fn trajectory_to_py(py: Python<'_>, t: &Trajectory) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("birth_time", t.birth_time())?;
    d.set_item("end_time", t.end_time())?;
    let states: Vec<Vec<f64>> = t.states().iter().map(|s| s.as_slice().to_vec()).collect();
    d.set_item("states", states)?;
    Ok(d.into())
}

fn resolve_scenario(name: &str, horizon: usize) -> PyResult<ScenarioConfig> {
    match name {
        "scenario1" => Ok(scenario1_config(horizon)),
        "scenario2" => Ok(scenario2_config(horizon)),
        other => Err(PyValueError::new_err(format!(
            "unknown scenario `{other}` (expected scenario1 or scenario2)"
        ))),
    }
}

/// Closed-form number of global hypotheses after a first update; returns
/// `(mbm, mbm01)` as Python integers.
#[pyfunction]
fn count_hypotheses(measurements: u64, bernoullis: u64) -> PyResult<(BigUint, BigUint)> {
    let mbm =
        tpmb::assignment::count_mbm_hypotheses(measurements, bernoullis).map_err(to_py_err)?;
    let mbm01 =
        tpmb::assignment::count_mbm01_hypotheses(measurements, bernoullis).map_err(to_py_err)?;
    Ok((mbm, mbm01))
}

/// GOSPA distance between two sets of position vectors; returns
/// `(total, localization, missed, false)`.
#[pyfunction]
#[pyo3(signature = (truth, estimate, order=2.0, cutoff=10.0))]
fn gospa_distance(
    truth: Vec<Vec<f64>>,
    estimate: Vec<Vec<f64>>,
    order: f64,
    cutoff: f64,
) -> PyResult<(f64, f64, f64, f64)> {
    let params = MetricParams { order, cutoff, alpha: 2.0 };
    let truth = vectors_from_py(truth);
    let estimate = vectors_from_py(estimate);
    let g = gospa(&truth, &estimate, &params).map_err(to_py_err)?;
    Ok((g.total, g.localization, g.missed, g.false_))
}

/// Ground truth of a built-in scenario: a list of trajectory dictionaries.
#[pyfunction]
fn scenario_truth(py: Python<'_>, name: &str, horizon: usize, seed: u64) -> PyResult<Py<PyList>> {
    let cfg = resolve_scenario(name, horizon)?;
    let truth = generate_truth(&cfg, seed).map_err(to_py_err)?;
    let items: Vec<Py<PyDict>> =
        truth.iter().map(|t| trajectory_to_py(py, t)).collect::<PyResult<_>>()?;
    Ok(PyList::new(py, items)?.into())
}

/// Measurement record of a built-in scenario: one list of measurement
/// vectors per time step.
#[pyfunction]
fn scenario_measurements(
    name: &str,
    horizon: usize,
    seed: u64,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let cfg = resolve_scenario(name, horizon)?;
    let truth = generate_truth(&cfg, seed).map_err(to_py_err)?;
    let record = generate_measurements(&truth, &cfg.sensor, horizon, seed).map_err(to_py_err)?;
    Ok(record
        .steps()
        .iter()
        .map(|step| step.iter().map(|z| z.as_slice().to_vec()).collect())
        .collect())
}

/// One trajectory PMB filter instance bound to a built-in scenario's models.
#[pyclass]
struct Filter {
    inner: TpmbFilter,
}

#[pymethods]
impl Filter {
    /// `variant` is one of `tpmb-alive`, `tpmb-all`, `tgnpmb-alive`,
    /// `tgnpmb-all`; models come from the named built-in scenario.
    #[new]
    #[pyo3(signature = (variant, scenario="scenario1", lscan_window=5, max_hypotheses=200, estimate_threshold=0.5, gate_threshold=13.8))]
    fn new(
        variant: &str,
        scenario: &str,
        lscan_window: usize,
        max_hypotheses: usize,
        estimate_threshold: f64,
        gate_threshold: f64,
    ) -> PyResult<Self> {
        let (kind, gnn) = match variant {
            "tpmb-alive" => (Variant::Alive, false),
            "tpmb-all" => (Variant::All, false),
            "tgnpmb-alive" => (Variant::Alive, true),
            "tgnpmb-all" => (Variant::All, true),
            other => {
                return Err(PyValueError::new_err(format!("unknown filter variant `{other}`")))
            }
        };
        let cfg = resolve_scenario(scenario, 1)?;
        let params = FilterParams {
            lscan_window,
            max_hypotheses,
            estimate_threshold,
            gate_threshold,
            ..FilterParams::default()
        };
        let inner = TpmbFilter::new(kind, gnn, params, cfg.motion, cfg.birth, cfg.sensor)
            .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// Advances one time step with the given measurement vectors.
    fn step(&mut self, measurements: Vec<Vec<f64>>) -> PyResult<()> {
        let measurements = vectors_from_py(measurements);
        self.inner.step(&measurements).map_err(to_py_err)?;
        Ok(())
    }

    /// Current time step (0 before the first `step`).
    fn time(&self) -> usize {
        self.inner.time()
    }

    /// Number of Bernoulli components in the posterior.
    fn num_components(&self) -> usize {
        self.inner.posterior().bernoullis().len()
    }

    /// Current trajectory estimates as dictionaries with `birth_time`,
    /// `end_time` and `states`.
    fn estimates(&self, py: Python<'_>) -> PyResult<Py<PyList>> {
        let estimates = self.inner.estimates().map_err(to_py_err)?;
        let items: Vec<Py<PyDict>> =
            estimates.iter().map(|t| trajectory_to_py(py, t)).collect::<PyResult<_>>()?;
        Ok(PyList::new(py, items)?.into())
    }
}

/// Runs a Monte Carlo campaign from a TOML configuration string and returns
/// the aggregate records as dictionaries.
#[pyfunction]
fn run_campaign_toml(py: Python<'_>, config: &str) -> PyResult<Py<PyList>> {
    let cfg = CampaignConfig::from_toml(config).map_err(to_py_err)?;
    let table = run_campaign(&cfg).map_err(to_py_err)?;
    let mut rows: Vec<Py<PyDict>> = Vec::with_capacity(table.records.len());
    for r in &table.records {
        let d = PyDict::new(py);
        d.set_item("filter", &r.filter)?;
        d.set_item("variant", &r.variant)?;
        d.set_item("sweep_key", &r.sweep_key)?;
        d.set_item("sweep_value", r.sweep_value)?;
        d.set_item("lscan", r.lscan)?;
        d.set_item("d_total", r.d_total)?;
        d.set_item("localization", r.localization)?;
        d.set_item("missed", r.missed)?;
        d.set_item("false", r.false_)?;
        rows.push(d.into());
    }
    Ok(PyList::new(py, rows)?.into())
}

#[pymodule]
fn tpmb_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(count_hypotheses, m)?)?;
    m.add_function(wrap_pyfunction!(gospa_distance, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_truth, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_measurements, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign_toml, m)?)?;
    m.add_class::<Filter>()?;
    Ok(())
}
