//! Python bindings. Points are `(x, y)` tuples, fields come back in the
//! order `(u, v, p, theta)` and parameters are flat lists of floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thermopinn::evaluation::error_report as report;
use thermopinn::physics::{beltrami_exact, beltrami_forcing, Beltrami};
use thermopinn::sampling::hierarchical_datasets;
use thermopinn::training::{train as train_net, OptimizerKind};
use thermopinn::{DomainSpec, FlowParameters, ParameterVector, PinnError, Point2, TrainConfig};

fn err(e: PinnError) -> PyErr {
    match e {
        PinnError::NumericalOverflow { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Layer widths, written `2-32-32-4`.
#[pyclass(name = "Architecture", frozen, skip_from_py_object)]
struct PyArchitecture(thermopinn::Architecture);

#[pymethods]
impl PyArchitecture {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(PyArchitecture).map_err(err)
    }

    #[getter]
    fn widths(&self) -> Vec<usize> {
        self.0.widths().to_vec()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.0.parameter_count()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Architecture('{}')", self.0)
    }
}

fn params(arch: &PyArchitecture, values: Vec<f64>) -> PyResult<ParameterVector> {
    ParameterVector::new(&arch.0, values).map_err(err)
}

fn flow(nu: f64) -> FlowParameters {
    FlowParameters {
        nu,
        ..FlowParameters::default()
    }
}

/// Glorot-uniform initialization.
#[pyfunction]
fn init_parameters(arch: &PyArchitecture, seed: u64) -> Vec<f64> {
    thermopinn::init_parameters(&arch.0, seed).as_slice().to_vec()
}

#[pyfunction]
fn forward(arch: &PyArchitecture, parameters: Vec<f64>, x: f64, y: f64) -> PyResult<(f64, f64, f64, f64)> {
    let s = thermopinn::forward(&arch.0, &params(arch, parameters)?, Point2::new(x, y)).map_err(err)?;
    Ok((s.u, s.v, s.p, s.theta))
}

/// Per field `(value, dx, dy, dxx, dxy, dyy)`.
#[pyfunction]
fn evaluate_jet(arch: &PyArchitecture, parameters: Vec<f64>, x: f64, y: f64) -> PyResult<Vec<[f64; 6]>> {
    let jet = thermopinn::evaluate_jet(&arch.0, &params(arch, parameters)?, Point2::new(x, y)).map_err(err)?;
    Ok(jet.fields().iter().map(|j| j.to_array()).collect())
}

#[pyfunction]
fn exact_solution(x: f64, y: f64) -> (f64, f64, f64, f64) {
    let s = beltrami_exact(Point2::new(x, y));
    (s.u, s.v, s.p, s.theta)
}

/// `((fb_x, fb_y), f)` for viscosity `nu`.
#[pyfunction]
#[pyo3(signature = (x, y, nu = 1.0))]
fn forcing(x: f64, y: f64, nu: f64) -> ((f64, f64), f64) {
    let (fb, f) = beltrami_forcing(Point2::new(x, y), &flow(nu));
    ((fb[0], fb[1]), f)
}

/// Nested collocation sets on the bi-unit square. Each entry is a dict with
/// `domain` points and `boundary` points tagged by edge.
#[pyfunction]
fn datasets<'py>(py: Python<'py>, levels: usize, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let sets = hierarchical_datasets(levels, &DomainSpec::default(), seed, &Beltrami).map_err(err)?;
    sets.iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("level", s.level)?;
            d.set_item("domain", s.domain_points.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>())?;
            d.set_item(
                "boundary",
                s.boundary_points
                    .iter()
                    .map(|b| (b.point.x, b.point.y, b.edge.tag()))
                    .collect::<Vec<_>>(),
            )?;
            Ok(d)
        })
        .collect()
}

/// Train on dataset `level` until the total residual reaches `threshold`.
/// Returns a dict with `parameters`, `status`, `epochs` and the per-epoch
/// `total`, `domain` and `boundary` residual series.
#[pyfunction]
#[pyo3(signature = (arch, seed, level, threshold, optimizer = "lbfgs", augmented = true, max_epochs = 50_000, pressure_boundary = false, nu = 1.0))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    arch: &PyArchitecture,
    seed: u64,
    level: usize,
    threshold: f64,
    optimizer: &str,
    augmented: bool,
    max_epochs: usize,
    pressure_boundary: bool,
    nu: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let optimizer = match optimizer {
        "adam" => OptimizerKind::Adam,
        "lbfgs" => OptimizerKind::Lbfgs,
        other => return Err(PyValueError::new_err(format!("unknown optimizer {other:?}"))),
    };
    let config = TrainConfig {
        optimizer,
        threshold,
        max_epochs,
        augmented,
        pressure_boundary,
        seed,
        ..TrainConfig::default()
    };
    config.validate().map_err(err)?;
    let set = hierarchical_datasets(level + 1, &DomainSpec::default(), seed, &Beltrami)
        .map_err(err)?
        .swap_remove(level);
    let init = thermopinn::init_parameters(&arch.0, seed);
    let (p, history) = py
        .detach(|| train_net(&arch.0, &init, &set, flow(nu), &Beltrami, &config))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("parameters", p.as_slice().to_vec())?;
    d.set_item("status", format!("{:?}", history.status))?;
    d.set_item("epochs", history.epochs_used)?;
    d.set_item("total", history.total_series())?;
    d.set_item("domain", history.domain_series())?;
    d.set_item("boundary", history.boundary_series())?;
    Ok(d)
}

/// `{field: {"w0", "w1", "w2", "l2"}}` on an `n × n` grid.
#[pyfunction]
#[pyo3(signature = (arch, parameters, grid_points = 100))]
fn error_report<'py>(
    py: Python<'py>,
    arch: &PyArchitecture,
    parameters: Vec<f64>,
    grid_points: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = report(&arch.0, &params(arch, parameters)?, &DomainSpec::default(), grid_points, &Beltrami)
        .map_err(err)?;
    let out = PyDict::new(py);
    for (name, f) in thermopinn::evaluation::FIELD_NAMES.iter().zip(r.fields()) {
        let d = PyDict::new(py);
        d.set_item("w0", f.w0_inf)?;
        d.set_item("w1", f.w1_inf)?;
        d.set_item("w2", f.w2_inf)?;
        d.set_item("l2", f.l2)?;
        out.set_item(*name, d)?;
    }
    Ok(out)
}

#[pymodule]
fn thermopinn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArchitecture>()?;
    m.add_function(wrap_pyfunction!(init_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(forward, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_jet, m)?)?;
    m.add_function(wrap_pyfunction!(exact_solution, m)?)?;
    m.add_function(wrap_pyfunction!(forcing, m)?)?;
    m.add_function(wrap_pyfunction!(datasets, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(error_report, m)?)?;
    Ok(())
}
