//! Python bindings for `gtdesign`.

use gtdesign::simulation::{d_efficiency, ds_efficiency, EfficiencyReference};
use gtdesign::{Criterion, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::InvalidBounds(_)
        | Error::InvalidDesign(_)
        | Error::InvalidSupport(_)
        | Error::Infeasible { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn criterion(name: &str) -> PyResult<Criterion> {
    name.parse().map_err(to_py)
}

#[pyclass(name = "ParamVector", frozen, from_py_object)]
#[derive(Clone)]
struct PyParamVector(gtdesign::ParamVector);

#[pymethods]
impl PyParamVector {
    #[new]
    fn new(p0: f64, p1: f64, p2: f64) -> PyResult<Self> {
        gtdesign::ParamVector::new(p0, p1, p2)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn p0(&self) -> f64 {
        self.0.p0()
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.0.p1()
    }

    #[getter]
    fn p2(&self) -> f64 {
        self.0.p2()
    }

    /// Probability of a positive pooled result for a group of size `x`.
    fn response_probability(&self, x: f64) -> f64 {
        self.0.response_probability(x)
    }

    fn __repr__(&self) -> String {
        format!(
            "ParamVector({}, {}, {})",
            self.0.p0(),
            self.0.p1(),
            self.0.p2()
        )
    }
}

#[pyclass(name = "SizeBounds", frozen, from_py_object)]
#[derive(Clone)]
struct PySizeBounds(gtdesign::SizeBounds);

#[pymethods]
impl PySizeBounds {
    #[new]
    fn new(lower: f64, upper: f64) -> PyResult<Self> {
        gtdesign::SizeBounds::new(lower, upper)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn lower(&self) -> f64 {
        self.0.lower()
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.0.upper()
    }

    fn __repr__(&self) -> String {
        format!("SizeBounds({}, {})", self.0.lower(), self.0.upper())
    }
}

#[pyclass(name = "ApproximateDesign", frozen, from_py_object)]
#[derive(Clone)]
struct PyApproximateDesign(gtdesign::ApproximateDesign);

#[pymethods]
impl PyApproximateDesign {
    #[new]
    fn new(sizes: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        gtdesign::ApproximateDesign::from_parts(&sizes, &weights)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn sizes(&self) -> Vec<f64> {
        self.0.sizes()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ApproximateDesign(sizes={:?}, weights={:?})",
            self.0.sizes(),
            self.0.weights()
        )
    }
}

#[pyclass(name = "ExactDesign", frozen, from_py_object)]
#[derive(Clone)]
struct PyExactDesign(gtdesign::ExactDesign);

#[pymethods]
impl PyExactDesign {
    #[new]
    fn new(sizes: Vec<u64>, counts: Vec<u64>) -> PyResult<Self> {
        gtdesign::ExactDesign::from_parts(&sizes, &counts)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn sizes(&self) -> Vec<u64> {
        self.0.sizes()
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.0.counts()
    }

    #[getter]
    fn total_trials(&self) -> u64 {
        self.0.total_trials()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "ExactDesign(sizes={:?}, counts={:?})",
            self.0.sizes(),
            self.0.counts()
        )
    }
}

/// Optimal approximate design for `criterion` ("d" or "ds").
#[pyfunction]
#[pyo3(signature = (theta, bounds, criterion = "d"))]
fn optimal_design(
    theta: &PyParamVector,
    bounds: &PySizeBounds,
    criterion: &str,
) -> PyResult<PyApproximateDesign> {
    let opt = gtdesign::optimal_design(&theta.0, &bounds.0, self::criterion(criterion)?)
        .map_err(to_py)?;
    Ok(PyApproximateDesign(opt.design))
}

/// Rounds an approximate design to `n` trials at integer group sizes.
#[pyfunction]
#[pyo3(signature = (design, theta, n, criterion = "d"))]
fn round_design(
    design: &PyApproximateDesign,
    theta: &PyParamVector,
    n: u64,
    criterion: &str,
) -> PyResult<PyExactDesign> {
    gtdesign::round_design(&design.0, &theta.0, n, self::criterion(criterion)?)
        .map(PyExactDesign)
        .map_err(to_py)
}

/// Integer counts summing to `n` from target proportions.
#[pyfunction]
fn efficient_round(weights: Vec<f64>, n: u64) -> PyResult<Vec<u64>> {
    gtdesign::efficient_round(&weights, n)
        .map(|r| r.counts)
        .map_err(to_py)
}

/// `log |M|` or `-log (M^-)_{11}` for an approximate design.
#[pyfunction]
#[pyo3(signature = (design, theta, criterion = "d"))]
fn criterion_value(
    design: &PyApproximateDesign,
    theta: &PyParamVector,
    criterion: &str,
) -> PyResult<f64> {
    gtdesign::criterion_value(&design.0, &theta.0, self::criterion(criterion)?).map_err(to_py)
}

/// 3x3 Fisher information matrix as nested lists.
#[pyfunction]
fn information_matrix(
    design: &PyApproximateDesign,
    theta: &PyParamVector,
) -> PyResult<Vec<Vec<f64>>> {
    let m = gtdesign::information_matrix(&design.0, &theta.0).map_err(to_py)?;
    let m = m.matrix();
    Ok((0..3)
        .map(|i| (0..3).map(|j| m[(i, j)]).collect())
        .collect())
}

/// Returns `(max_violation, argmax_size)` over a grid of group sizes.
#[pyfunction]
#[pyo3(signature = (design, theta, bounds, criterion = "d", grid_step = 0.01))]
fn verify_optimality(
    design: &PyApproximateDesign,
    theta: &PyParamVector,
    bounds: &PySizeBounds,
    criterion: &str,
    grid_step: f64,
) -> PyResult<(f64, f64)> {
    let r = gtdesign::verify_optimality(
        &design.0,
        &theta.0,
        &bounds.0,
        self::criterion(criterion)?,
        grid_step,
    )
    .map_err(to_py)?;
    Ok((r.max_violation, r.argmax_size))
}

/// Simulated `(eff_d, eff_s)`; either is `None` when undefined.
#[pyfunction]
#[pyo3(signature = (design, theta, bounds, reps, seed = 1))]
fn simulate_efficiencies(
    py: Python<'_>,
    design: &PyExactDesign,
    theta: &PyParamVector,
    bounds: &PySizeBounds,
    reps: u64,
    seed: u64,
) -> PyResult<(Option<f64>, Option<f64>)> {
    let (design, theta, bounds) = (design.0.clone(), theta.0, bounds.0);
    py.detach(move || {
        let reference = EfficiencyReference::new(&theta, &bounds)?;
        let mse = gtdesign::simulate_mse(&design, &theta, reps, seed)?;
        Ok((
            d_efficiency(&mse, &reference).ok(),
            ds_efficiency(&mse, &reference).ok(),
        ))
    })
    .map_err(to_py)
}

#[pymodule(name = "gtdesign")]
fn gtdesign_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParamVector>()?;
    m.add_class::<PySizeBounds>()?;
    m.add_class::<PyApproximateDesign>()?;
    m.add_class::<PyExactDesign>()?;
    m.add_function(wrap_pyfunction!(optimal_design, m)?)?;
    m.add_function(wrap_pyfunction!(round_design, m)?)?;
    m.add_function(wrap_pyfunction!(efficient_round, m)?)?;
    m.add_function(wrap_pyfunction!(criterion_value, m)?)?;
    m.add_function(wrap_pyfunction!(information_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(verify_optimality, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_efficiencies, m)?)?;
    Ok(())
}
