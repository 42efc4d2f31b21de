//! Python bindings: weights, boundary conditions, solver options, the three
//! solve entry points, the diagnostics recomputation and the pointwise model
//! and Pontryagin functions.

use dubins_pair as dp;
use dubins_pair::pmp;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(dubins_pair, SolverError, PyRuntimeError);

fn to_py(e: dp::Error) -> PyErr {
    match e {
        dp::Error::ScenarioInvalid(_)
        | dp::Error::OptionsInvalid(_)
        | dp::Error::InvalidGrid(_)
        | dp::Error::GridMismatch(_) => PyValueError::new_err(e.to_string()),
        other => SolverError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Weights", module = "dubins_pair", from_py_object)]
#[derive(Clone, Copy)]
pub struct PyWeights {
    inner: dp::Weights,
}

#[pymethods]
impl PyWeights {
    #[new]
    #[pyo3(signature = (delta = 1.0, beta = 0.05, alpha = 0.05, rho = 1.0))]
    fn new(delta: f64, beta: f64, alpha: f64, rho: f64) -> PyResult<Self> {
        let inner = dp::Weights {
            delta,
            beta,
            alpha,
            rho,
        };
        let v = inner.violations();
        if !v.is_empty() {
            return Err(PyValueError::new_err(v.join("; ")));
        }
        Ok(Self { inner })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    fn swapped(&self) -> Self {
        Self {
            inner: self.inner.swapped(),
        }
    }

    fn __repr__(&self) -> String {
        let w = &self.inner;
        format!(
            "Weights(delta={}, beta={}, alpha={}, rho={})",
            w.delta, w.beta, w.alpha, w.rho
        )
    }
}

/// End configurations as `[x1, x2, x3, y1, y2, y3]` and the horizon `T`.
#[pyclass(name = "BoundaryConditions", module = "dubins_pair", from_py_object)]
#[derive(Clone, Copy)]
pub struct PyBoundaryConditions {
    inner: dp::BoundaryConditions,
}

#[pymethods]
impl PyBoundaryConditions {
    #[new]
    fn new(initial: [f64; 6], terminal: [f64; 6], horizon: f64) -> Self {
        Self {
            inner: dp::BoundaryConditions {
                initial: dp::PairState::from_array(initial),
                terminal: dp::PairState::from_array(terminal),
                horizon,
            },
        }
    }

    #[getter]
    fn initial(&self) -> [f64; 6] {
        self.inner.initial.to_array()
    }

    #[getter]
    fn terminal(&self) -> [f64; 6] {
        self.inner.terminal.to_array()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    fn swapped(&self) -> Self {
        Self {
            inner: self.inner.swapped(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "BoundaryConditions(initial={:?}, terminal={:?}, horizon={})",
            self.initial(),
            self.terminal(),
            self.inner.horizon
        )
    }
}

#[pyclass(name = "SolveOptions", module = "dubins_pair", from_py_object)]
#[derive(Clone)]
pub struct PySolveOptions {
    inner: dp::SolveOptions,
}

#[pymethods]
impl PySolveOptions {
    #[new]
    #[pyo3(signature = (
        method = "fbsm",
        max_iterations = 500,
        gradient_tolerance = 1e-6,
        cost_tolerance = 1e-8,
        armijo_slope = 1e-4,
        backtrack_factor = 0.5,
        initial_step = 1.0,
        penalty_initial = 1.0,
        penalty_growth = 10.0,
        penalty_max = 1e6,
        residual_tolerance = 1e-6,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        method: &str,
        max_iterations: usize,
        gradient_tolerance: f64,
        cost_tolerance: f64,
        armijo_slope: f64,
        backtrack_factor: f64,
        initial_step: f64,
        penalty_initial: f64,
        penalty_growth: f64,
        penalty_max: f64,
        residual_tolerance: f64,
    ) -> PyResult<Self> {
        let method: dp::Method = method.parse().map_err(PyValueError::new_err)?;
        let inner = dp::SolveOptions {
            method,
            max_iterations,
            gradient_tolerance,
            cost_tolerance,
            armijo_slope,
            backtrack_factor,
            initial_step,
            penalty: dp::PenaltySchedule {
                initial: penalty_initial,
                growth: penalty_growth,
                max: penalty_max,
            },
            residual_tolerance,
            ..dp::SolveOptions::default()
        };
        let v = inner.violations();
        if !v.is_empty() {
            return Err(PyValueError::new_err(v.join("; ")));
        }
        Ok(Self { inner })
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.as_str()
    }

    #[getter]
    fn max_iterations(&self) -> usize {
        self.inner.max_iterations
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "SolveReport", module = "dubins_pair", frozen, get_all)]
pub struct PySolveReport {
    method: String,
    converged: bool,
    iterations: usize,
    final_cost: f64,
    augmented_cost: f64,
    penalty_weights: [f64; 2],
    terminal_residual: [f64; 6],
    terminal_residual_norm: f64,
    max_stationarity: f64,
    hamiltonian_drift: f64,
    min_separation: f64,
    /// `(stage, weight_a, weight_b, augmented_cost)` per accepted sweep iterate.
    cost_history: Vec<(usize, f64, f64, f64)>,
    stop_reason: String,
}

impl From<&dp::SolveReport> for PySolveReport {
    fn from(r: &dp::SolveReport) -> Self {
        Self {
            method: r.method.to_string(),
            converged: r.converged,
            iterations: r.iterations,
            final_cost: r.final_cost,
            augmented_cost: r.augmented_cost,
            penalty_weights: r.penalty_weights,
            terminal_residual: r.terminal_residual,
            terminal_residual_norm: r.terminal_residual_norm(),
            max_stationarity: r.max_stationarity,
            hamiltonian_drift: r.hamiltonian_drift,
            min_separation: r.min_separation,
            cost_history: r
                .cost_history
                .iter()
                .map(|c| {
                    (
                        c.stage,
                        c.penalty_weights[0],
                        c.penalty_weights[1],
                        c.augmented_cost,
                    )
                })
                .collect(),
            stop_reason: r.stop_reason.clone(),
        }
    }
}

#[pymethods]
impl PySolveReport {
    fn __repr__(&self) -> String {
        format!(
            "SolveReport(method={}, converged={}, iterations={}, final_cost={})",
            self.method, self.converged, self.iterations, self.final_cost
        )
    }
}

#[pyclass(name = "Solution", module = "dubins_pair", frozen)]
pub struct PySolution {
    inner: dp::Solution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.states.grid().times().collect()
    }

    /// Node states, one `[x1, x2, x3, y1, y2, y3]` per grid node.
    #[getter]
    fn states(&self) -> Vec<[f64; 6]> {
        self.inner
            .states
            .nodes()
            .iter()
            .map(|s| s.to_array())
            .collect()
    }

    #[getter]
    fn costates(&self) -> Vec<[f64; 6]> {
        self.inner.costates.nodes().iter().map(|p| p.0).collect()
    }

    /// Node controls `[u1, u2, v1, v2]`.
    #[getter]
    fn controls(&self) -> Vec<[f64; 4]> {
        self.inner
            .controls
            .nodes()
            .iter()
            .map(|c| c.to_array())
            .collect()
    }

    #[getter]
    fn report(&self) -> PySolveReport {
        (&self.inner.report).into()
    }

    fn swapped(&self) -> Self {
        Self {
            inner: self.inner.swapped(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.states.nodes().len()
    }
}

fn grid(bc: &PyBoundaryConditions, steps: usize) -> PyResult<dp::TimeGrid> {
    dp::TimeGrid::new(bc.inner.horizon, steps).map_err(to_py)
}

fn options(opts: Option<PySolveOptions>) -> dp::SolveOptions {
    opts.map(|o| o.inner).unwrap_or_default()
}

/// Runs the method in `options`; returns `(solution, sweep)` where `sweep` is
/// the forward-backward stage of a combined run and `None` otherwise.
#[pyfunction]
#[pyo3(signature = (bc, weights, steps, options = None))]
fn solve(
    py: Python<'_>,
    bc: PyBoundaryConditions,
    weights: PyWeights,
    steps: usize,
    options: Option<PySolveOptions>,
) -> PyResult<(PySolution, Option<PySolution>)> {
    let grid = grid(&bc, steps)?;
    let opts = self::options(options);
    let (sol, sweep) = py
        .detach(|| dp::solve(&bc.inner, &weights.inner, grid, &opts))
        .map_err(to_py)?;
    Ok((
        PySolution { inner: sol },
        sweep.map(|s| PySolution { inner: s }),
    ))
}

#[pyfunction]
#[pyo3(signature = (bc, weights, steps, options = None))]
fn fbsm_solve(
    py: Python<'_>,
    bc: PyBoundaryConditions,
    weights: PyWeights,
    steps: usize,
    options: Option<PySolveOptions>,
) -> PyResult<PySolution> {
    let grid = grid(&bc, steps)?;
    let opts = self::options(options);
    py.detach(|| dp::fbsm_solve(&bc.inner, &weights.inner, grid, &opts))
        .map(|inner| PySolution { inner })
        .map_err(to_py)
}

/// Single shooting, optionally warm-started from an initial costate.
#[pyfunction]
#[pyo3(signature = (bc, weights, steps, options = None, warm = None))]
fn shooting_solve(
    py: Python<'_>,
    bc: PyBoundaryConditions,
    weights: PyWeights,
    steps: usize,
    options: Option<PySolveOptions>,
    warm: Option<[f64; 6]>,
) -> PyResult<PySolution> {
    let grid = grid(&bc, steps)?;
    let opts = self::options(options);
    py.detach(|| {
        dp::shooting_solve(
            &bc.inner,
            &weights.inner,
            grid,
            &opts,
            warm.map(dp::Costate),
        )
    })
    .map(|inner| PySolution { inner })
    .map_err(to_py)
}

/// Recomputed diagnostics of a solution, as a dict.
#[pyfunction]
fn check_suite<'py>(
    py: Python<'py>,
    solution: &PySolution,
    bc: PyBoundaryConditions,
    weights: PyWeights,
) -> PyResult<Bound<'py, PyDict>> {
    let d = dp::check_suite(&solution.inner, &bc.inner, &weights.inner).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("final_cost", d.final_cost)?;
    out.set_item("terminal_residual", d.terminal_residual)?;
    out.set_item("max_stationarity", d.max_stationarity)?;
    out.set_item("hamiltonian_drift", d.hamiltonian_drift)?;
    out.set_item("min_separation", d.min_separation)?;
    Ok(out)
}

#[pyfunction]
fn dynamics_rhs(state: [f64; 6], control: [f64; 4]) -> [f64; 6] {
    dp::model::dynamics_rhs(
        &dp::PairState::from_array(state),
        &dp::ControlPair::from_array(control),
    )
}

#[pyfunction]
fn running_cost(state: [f64; 6], control: [f64; 4], weights: PyWeights) -> PyResult<f64> {
    dp::model::running_cost(
        &dp::PairState::from_array(state),
        &dp::ControlPair::from_array(control),
        &weights.inner,
    )
    .map_err(to_py)
}

#[pyfunction]
fn hamiltonian(
    state: [f64; 6],
    costate: [f64; 6],
    control: [f64; 4],
    weights: PyWeights,
) -> PyResult<f64> {
    pmp::hamiltonian(
        &dp::PairState::from_array(state),
        &dp::Costate(costate),
        &dp::ControlPair::from_array(control),
        &weights.inner,
    )
    .map_err(to_py)
}

#[pyfunction]
fn optimal_control(state: [f64; 6], costate: [f64; 6], weights: PyWeights) -> [f64; 4] {
    pmp::optimal_control(
        &dp::PairState::from_array(state),
        &dp::Costate(costate),
        &weights.inner,
    )
    .to_array()
}

#[pyfunction]
fn adjoint_rhs(
    state: [f64; 6],
    costate: [f64; 6],
    control: [f64; 4],
    weights: PyWeights,
) -> PyResult<[f64; 6]> {
    pmp::adjoint_rhs(
        &dp::PairState::from_array(state),
        &dp::Costate(costate),
        &dp::ControlPair::from_array(control),
        &weights.inner,
    )
    .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "dubins_pair")]
fn dubins_pair_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<PyWeights>()?;
    m.add_class::<PyBoundaryConditions>()?;
    m.add_class::<PySolveOptions>()?;
    m.add_class::<PySolveReport>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fbsm_solve, m)?)?;
    m.add_function(wrap_pyfunction!(shooting_solve, m)?)?;
    m.add_function(wrap_pyfunction!(check_suite, m)?)?;
    m.add_function(wrap_pyfunction!(dynamics_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(running_cost, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_control, m)?)?;
    m.add_function(wrap_pyfunction!(adjoint_rhs, m)?)?;
    Ok(())
}
