//! Python bindings. Models, contracts and results cross the boundary as
//! plain dicts with the same keys as the JSON run configuration.

use hcmix::variance::{gamma_dev_predicted as predicted, owen_t as owen};
use hcmix::{cholesky_coefficients, CorrelationMatrix, Method, ModelParams, PdeSettings, SimulationSettings};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(hcmix, HcmixError, PyException, "Numerical failure inside the engine.");

fn engine_err(e: hcmix::Error) -> PyErr {
    match e {
        hcmix::Error::NonPositiveParameter { .. }
        | hcmix::Error::CorrelationNotPositiveDefinite { .. }
        | hcmix::Error::InvalidContract(_)
        | hcmix::Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        e => HcmixError::new_err(e.to_string()),
    }
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>, what: &str) -> PyResult<T> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(format!("invalid {what}: {e}")))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HcmixError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn method(name: &str) -> PyResult<Method> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown method {name:?}")))
}

/// The base calibration as a dict.
#[pyfunction]
#[pyo3(signature = (s0 = 105.0))]
fn base_model(py: Python<'_>, s0: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &ModelParams::base_case(s0))
}

/// Upper-triangular factor `A` with `A A^T` equal to the correlation matrix.
#[pyfunction]
fn cholesky(corr: &Bound<'_, PyAny>) -> PyResult<[[f64; 4]; 4]> {
    let corr: CorrelationMatrix = from_py(corr, "correlation")?;
    Ok(cholesky_coefficients(&corr).map_err(engine_err)?.matrix())
}

#[pyfunction]
#[pyo3(signature = (model, contract, paths, steps, method = "mixed", l = 20, seed = 0, threads = 0, reference = None))]
#[allow(clippy::too_many_arguments)]
fn price<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyAny>,
    contract: &Bound<'py, PyAny>,
    paths: usize,
    steps: usize,
    method: &str,
    l: usize,
    seed: u64,
    threads: usize,
    reference: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let model = from_py::<ModelParams>(model, "model")?.validate().map_err(engine_err)?;
    let contract = from_py(contract, "contract")?;
    let method = self::method(method)?;
    let settings = SimulationSettings::new(paths, steps, seed).with_threads(threads);
    let pde = PdeSettings::new(l);
    let mut r = py
        .detach(|| hcmix::estimate(&model, &contract, method, &settings, &pde))
        .map_err(engine_err)?;
    if let Some(reference) = reference {
        r = r.with_reference(reference);
    }
    to_py(py, &r)
}

/// Standard and mixed estimators on common random numbers.
#[pyfunction]
#[pyo3(signature = (model, contract, paths, steps, l = 20, seed = 0, threads = 0))]
#[allow(clippy::too_many_arguments)]
fn variance_report<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyAny>,
    contract: &Bound<'py, PyAny>,
    paths: usize,
    steps: usize,
    l: usize,
    seed: u64,
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let model = from_py::<ModelParams>(model, "model")?.validate().map_err(engine_err)?;
    let contract = from_py(contract, "contract")?;
    let settings = SimulationSettings::new(paths, steps, seed).with_threads(threads);
    let pde = PdeSettings::new(l);
    let r = py
        .detach(|| hcmix::variance_report(&model, &contract, &settings, &pde))
        .map_err(engine_err)?;
    to_py(py, &r)
}

/// Moment, convergence and critical-time conditions.
#[pyfunction]
#[pyo3(signature = (model, maturity, alpha = 2.0))]
fn theory_check<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyAny>,
    maturity: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let model = from_py::<ModelParams>(model, "model")?.validate().map_err(engine_err)?;
    to_py(py, &hcmix::full_report(alpha, &model, maturity).map_err(engine_err)?)
}

#[pyfunction]
fn owen_t(beta: f64, vartheta: f64) -> f64 {
    owen(beta, vartheta)
}

/// Predicted deviation ratio `(1 - a11^2)^{-1/2}`; infinite at `a11 = 1`.
#[pyfunction]
fn gamma_dev_predicted(a11: f64) -> PyResult<f64> {
    Ok(predicted(a11).map_err(engine_err)?.to_f64())
}

#[pymodule]
#[pyo3(name = "hcmix")]
fn hcmix_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HcmixError", m.py().get_type::<HcmixError>())?;
    m.add_function(wrap_pyfunction!(base_model, m)?)?;
    m.add_function(wrap_pyfunction!(cholesky, m)?)?;
    m.add_function(wrap_pyfunction!(price, m)?)?;
    m.add_function(wrap_pyfunction!(variance_report, m)?)?;
    m.add_function(wrap_pyfunction!(theory_check, m)?)?;
    m.add_function(wrap_pyfunction!(owen_t, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_dev_predicted, m)?)?;
    Ok(())
}
