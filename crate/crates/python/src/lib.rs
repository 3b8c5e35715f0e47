//! Python bindings: frequencies, models, the KAM iteration and the
//! Lindstedt series.

use fk_kam::model::{equilibrium_residual, factorization_residual, PotentialMode};
use fk_kam::solver::run_kam_traced;
use fk_kam::{
    diophantine_constant, evaluate_series, expand_series, ErrorClass, Grid, KamError, KamOptions,
    ModelConfig, PerturbativeSeries, Potential, SolverState, SpectralField,
};
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: KamError) -> PyErr {
    let msg = format!("{}: {e}", e.name());
    match e.class() {
        ErrorClass::Input => PyValueError::new_err(msg),
        ErrorClass::Precondition => PyArithmeticError::new_err(msg),
        ErrorClass::Convergence | ErrorClass::Internal => PyRuntimeError::new_err(msg),
    }
}

/// Real periodic function sampled on a uniform grid.
#[pyclass(name = "Field", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField(SpectralField);

#[pymethods]
impl PyField {
    #[staticmethod]
    fn from_values(dim: usize, size: usize, values: Vec<f64>) -> PyResult<Self> {
        let grid = Grid::new(dim, size).map_err(py_err)?;
        SpectralField::from_grid(grid, values).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn size(&self) -> usize {
        self.0.size()
    }

    /// Grid values in row-major order.
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    /// Fourier coefficient of mode `k` as `(re, im)`.
    fn coefficient(&self, k: Vec<i64>) -> (f64, f64) {
        let c = self.0.coefficient(&k);
        (c.re, c.im)
    }

    fn average(&self) -> f64 {
        self.0.average()
    }

    fn sup_norm(&self) -> f64 {
        self.0.sup_norm()
    }

    fn translate(&self, shift: Vec<f64>) -> Self {
        Self(self.0.translate(&shift))
    }

    fn distance(&self, other: &PyField) -> PyResult<f64> {
        self.0.distance(&other.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Field(dim={}, size={})", self.0.dim(), self.0.size())
    }
}

/// Model data: frequency, potential, `beta` and `eta`.
#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel(ModelConfig);

#[pymethods]
impl PyModel {
    /// `modes` lists `(j, re, im)`; conjugate modes are added.
    #[new]
    #[pyo3(signature = (omega, beta, modes, eta = 0.0, tau = 1.0, cutoff = 200))]
    fn new(
        omega: Vec<f64>,
        beta: Vec<f64>,
        modes: Vec<(Vec<i64>, f64, f64)>,
        eta: f64,
        tau: f64,
        cutoff: usize,
    ) -> PyResult<Self> {
        let freq = diophantine_constant(&omega, tau, cutoff).map_err(py_err)?;
        let modes = modes
            .into_iter()
            .map(|(j, re, im)| PotentialMode {
                j,
                amp: Complex64::new(re, im),
            })
            .collect();
        let potential = Potential::new(omega.len() + 1, modes).map_err(py_err)?;
        ModelConfig::new(freq, beta, eta, potential).map(Self).map_err(py_err)
    }

    /// Same model with the potential multiplied by `mu`.
    fn scaled(&self, mu: f64) -> Self {
        Self(self.0.scaled(mu))
    }

    fn with_eta(&self, eta: f64) -> Self {
        Self(self.0.with_eta(eta))
    }

    #[getter]
    fn omega(&self) -> Vec<f64> {
        self.0.omega().to_vec()
    }

    #[getter]
    fn kappa_hat(&self) -> f64 {
        self.0.freq.kappa_hat
    }
}

/// `(v, sigma, lambda, c)`.
#[pyclass(name = "State", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState(SolverState);

#[pymethods]
impl PyState {
    /// `v = 0, sigma = lambda = 0, c = 1`.
    #[staticmethod]
    fn trivial(dim: usize, size: usize) -> PyResult<Self> {
        Ok(Self(SolverState::trivial(Grid::new(dim, size).map_err(py_err)?)))
    }

    #[getter]
    fn v(&self) -> PyField {
        PyField(self.0.v.clone())
    }

    #[getter]
    fn c(&self) -> PyField {
        PyField(self.0.c.clone())
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter(lambda_)]
    fn lambda(&self) -> f64 {
        self.0.lambda
    }

    /// Sup norms of the two residuals.
    fn residuals(&self, model: &PyModel) -> PyResult<(f64, f64)> {
        let e = equilibrium_residual(&self.0, &model.0).map_err(py_err)?;
        let f = factorization_residual(&self.0, &model.0).map_err(py_err)?;
        Ok((e.sup_norm(), f.sup_norm()))
    }

    fn distance(&self, other: &PyState) -> PyResult<f64> {
        self.0.distance(&other.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("State(sigma={:e}, lambda={:e}, size={})", self.0.sigma, self.0.lambda, self.0.v.size())
    }
}

/// Coefficients of the expansion in the potential amplitude.
#[pyclass(name = "Series", frozen)]
struct PySeries(PerturbativeSeries);

#[pymethods]
impl PySeries {
    #[getter]
    fn order(&self) -> usize {
        self.0.order()
    }

    #[getter]
    fn sigma_coeffs(&self) -> Vec<f64> {
        self.0.sigma_coeffs.clone()
    }

    #[getter]
    fn lambda_coeffs(&self) -> Vec<f64> {
        self.0.lambda_coeffs.clone()
    }

    fn v_coeff(&self, n: usize) -> PyResult<PyField> {
        self.0
            .v_coeffs
            .get(n)
            .map(|f| PyField(f.clone()))
            .ok_or_else(|| PyValueError::new_err(format!("order {n} out of range")))
    }

    /// Partial sum at amplitude `mu`.
    fn evaluate(&self, mu: f64) -> PyState {
        PyState(evaluate_series(&self.0, mu))
    }
}

/// Returns `(kappa_hat, k, m)`.
#[pyfunction]
#[pyo3(signature = (omega, tau = 1.0, cutoff = 200))]
fn diophantine(omega: Vec<f64>, tau: f64, cutoff: usize) -> PyResult<(f64, Vec<i64>, i64)> {
    let f = diophantine_constant(&omega, tau, cutoff).map_err(py_err)?;
    Ok((f.kappa_hat, f.minimizer.0, f.minimizer.1))
}

/// Runs the iteration from `guess` (trivial on `grid_size` if omitted).
/// Returns the state and the residual after each step, the first entry
/// being the residual of the guess.
#[pyfunction]
#[pyo3(signature = (model, grid_size = 128, guess = None, tol = 1e-12, max_iter = 30))]
fn solve(
    py: Python<'_>,
    model: &PyModel,
    grid_size: usize,
    guess: Option<&PyState>,
    tol: f64,
    max_iter: usize,
) -> PyResult<(PyState, Vec<f64>)> {
    let guess = match guess {
        Some(g) => g.0.clone(),
        None => SolverState::trivial(Grid::new(model.0.dim(), grid_size).map_err(py_err)?),
    };
    let options = KamOptions {
        tol,
        max_iter,
        ..KamOptions::default()
    };
    let config = model.0.clone();
    let trace = py.detach(move || run_kam_traced(&config, &guess, &options));
    let residuals = trace.residuals();
    Ok((PyState(trace.result.map_err(py_err)?), residuals))
}

#[pyfunction]
#[pyo3(signature = (model, grid_size = 128, order = 3))]
fn series(model: &PyModel, grid_size: usize, order: usize) -> PyResult<PySeries> {
    let grid = Grid::new(model.0.dim(), grid_size).map_err(py_err)?;
    expand_series(&model.0, grid, order).map(PySeries).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "fk_kam")]
fn fk_kam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PySeries>()?;
    m.add_function(wrap_pyfunction!(diophantine, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(series, m)?)?;
    Ok(())
}
