//! Python bindings: models, tree simulation, minima, limit constants and
//! the limit process. Reports come back as JSON strings.

use brwlab::brw::{martingale_check, many_to_one_exact_report, minimum_samples, ray_statistic, simulate_tree, StatsRequest, TreeMode, DEFAULT_POP_CAP};
use brwlab::limits::{estimate_limit_constants, limit_cdf, sample_limit_process, TestFunction};
use brwlab::model::{calibrate, discrete_toy_model, preset, schedule, CalibratedModel, ModelSpec};
use brwlab::par::McConfig;
use brwlab::rng::RngStream;
use brwlab::rwalk::tail_prob;
use brwlab::samplers::sample_x;
use brwlab::BrwError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: BrwError) -> PyErr {
    if e.is_capacity() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// A calibrated model.
#[pyclass(name = "Model", frozen)]
pub struct PyModel {
    inner: CalibratedModel,
}

#[pymethods]
impl PyModel {
    /// Calibrate a named preset (`p1`, `p2-walk`, `p3-heavy`).
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let spec = preset(name).ok_or_else(|| PyValueError::new_err(format!("no preset named {name:?}")))?;
        Ok(PyModel { inner: calibrate(&spec).map_err(py_err)? })
    }

    #[staticmethod]
    fn discrete_toy() -> Self {
        PyModel { inner: discrete_toy_model() }
    }

    /// Calibrate a model spec given as JSON.
    #[staticmethod]
    fn calibrate(spec_json: &str) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyModel { inner: calibrate(&spec).map_err(py_err)? })
    }

    /// Load a calibrated model (fixture file contents).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel { inner: CalibratedModel::from_json(text).map_err(py_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }

    #[getter]
    fn mean_offspring(&self) -> f64 {
        self.inner.mean_offspring
    }

    #[getter]
    fn p_left(&self) -> f64 {
        self.inner.p_left
    }

    #[getter]
    fn n_min(&self) -> Option<usize> {
        self.inner.n_min
    }

    /// `(alpha_n, zeta_n, theta_n)`.
    fn schedule(&self, n: usize) -> PyResult<(f64, f64, f64)> {
        let s = schedule(&self.inner, n).map_err(py_err)?;
        Ok((s.alpha_n, s.zeta_n, s.theta_n))
    }

    /// `P(X <= -t)` under the spine law.
    fn tail_prob(&self, t: f64) -> PyResult<f64> {
        tail_prob(&self.inner, t).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Model(name={:?}, m={}, mean_offspring={})", self.inner.name, self.inner.m, self.inner.mean_offspring)
    }
}

/// Draws of the spine step `X`.
#[pyfunction]
#[pyo3(signature = (model, count, seed, stream=0))]
fn spine_steps(model: &PyModel, count: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, stream);
    (0..count).map(|_| sample_x(&model.inner, &mut rng)).collect()
}

/// Per-generation `(n, pop, M_n, W_n)` of one tree.
#[pyfunction]
#[pyo3(signature = (model, n, seed, stream=0))]
fn simulate(model: &PyModel, n: usize, seed: u64, stream: u64) -> PyResult<Vec<(usize, usize, f64, f64)>> {
    let mut rng = RngStream::new(seed, stream);
    let run = simulate_tree(&model.inner, n, TreeMode::FrontierOnly, &StatsRequest::default(), &mut rng, DEFAULT_POP_CAP).map_err(py_err)?;
    Ok(run.summaries.iter().map(|s| (s.n, s.pop, s.min_position, s.w)).collect())
}

/// `(M_n - alpha_n, W_n)` over replicates; trees lost to the population cap are dropped.
#[pyfunction]
#[pyo3(signature = (model, n, reps, seed, workers=1))]
fn minima(model: &PyModel, n: usize, reps: usize, seed: u64, workers: usize) -> PyResult<Vec<(f64, f64)>> {
    let (v, _) = minimum_samples(&model.inner, n, &McConfig::new(reps, seed).workers(workers)).map_err(py_err)?;
    Ok(v)
}

#[pyfunction]
#[pyo3(signature = (model, n, eps, seed, stream=0))]
fn ray_stat(model: &PyModel, n: usize, eps: f64, seed: u64, stream: u64) -> PyResult<f64> {
    let mut rng = RngStream::new(seed, stream);
    ray_statistic(&model.inner, n, eps, &mut rng, DEFAULT_POP_CAP).map_err(py_err)
}

/// Martingale report as JSON.
#[pyfunction]
#[pyo3(signature = (model, n_grid, reps, seed, workers=1))]
fn martingale(model: &PyModel, n_grid: Vec<usize>, reps: usize, seed: u64, workers: usize) -> PyResult<String> {
    let r = martingale_check(&model.inner, &n_grid, &McConfig::new(reps, seed).workers(workers)).map_err(py_err)?;
    Ok(serde_json::to_string(&r).unwrap())
}

/// Exact many-to-one report for the toy as JSON.
#[pyfunction]
fn many_to_one_exact(model: &PyModel, n: usize) -> PyResult<String> {
    let r = many_to_one_exact_report(&model.inner, n, 1e-12).map_err(py_err)?;
    Ok(serde_json::to_string(&r).unwrap())
}

/// `C*`, `C*(0)` and `C*(f)` for the default test functions, as JSON.
#[pyfunction]
#[pyo3(signature = (model, j_max, reps, seed, workers=1))]
fn limit_constants(model: &PyModel, j_max: usize, reps: usize, seed: u64, workers: usize) -> PyResult<String> {
    let e = estimate_limit_constants(&model.inner, j_max, &TestFunction::default_battery(), &McConfig::new(reps, seed).workers(workers))
        .map_err(py_err)?;
    Ok(serde_json::to_string(&e).unwrap())
}

#[pyfunction(name = "limit_cdf")]
fn py_limit_cdf(c: f64, w_samples: Vec<f64>, x: f64) -> f64 {
    limit_cdf(c, &w_samples, x)
}

/// Atoms of one draw of the limit process on `[lo, hi]` given `W = w`.
#[pyfunction]
#[pyo3(signature = (model, w, lo, hi, q_max, seed, stream=0))]
fn limit_process(model: &PyModel, w: f64, lo: f64, hi: f64, q_max: usize, seed: u64, stream: u64) -> PyResult<Vec<f64>> {
    let mut rng = RngStream::new(seed, stream);
    let d = sample_limit_process(&model.inner, w, (lo, hi), q_max, &mut rng).map_err(py_err)?;
    Ok(d.atoms.atoms().to_vec())
}

#[pymodule]
fn brwlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(spine_steps, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(minima, m)?)?;
    m.add_function(wrap_pyfunction!(ray_stat, m)?)?;
    m.add_function(wrap_pyfunction!(martingale, m)?)?;
    m.add_function(wrap_pyfunction!(many_to_one_exact, m)?)?;
    m.add_function(wrap_pyfunction!(limit_constants, m)?)?;
    m.add_function(wrap_pyfunction!(py_limit_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(limit_process, m)?)?;
    Ok(())
}
