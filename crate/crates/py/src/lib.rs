//! Python bindings: grids, parameters, states, the right-hand side, the
//! integrator with its history, the diagnostics and the run drivers.
//!
//! Arrays cross the boundary as plain lists of floats.

use std::path::PathBuf;

use nsac_core::diagnostics as diag;
use nsac_core::io::{self, RunConfig};
use nsac_core::timestepper::{default_snapshot_interval, stable_dt};
use nsac_core::{CosineAmplitudes, NsacError};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: NsacError) -> PyErr {
    match e {
        NsacError::Io { .. } => PyIOError::new_err(e.to_string()),
        NsacError::GridTooSmall(_)
        | NsacError::LengthMismatch { .. }
        | NsacError::InvalidParam(_)
        | NsacError::InvalidInitialData(_)
        | NsacError::TimeOutOfRange { .. }
        | NsacError::TooFewSnapshots { .. }
        | NsacError::SobolevOrder(_)
        | NsacError::Config { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Uniform grid on `[0, 1]` with `n_cells + 1` nodes.
#[pyclass(name = "Grid", module = "nsac", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyGrid(nsac_core::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(n_cells: usize) -> PyResult<Self> {
        nsac_core::Grid::new(n_cells).map(PyGrid).map_err(to_py)
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.0.n_cells()
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.0.nodes().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Grid(n_cells={})", self.0.n_cells())
    }
}

/// Model and solver parameters.
#[pyclass(name = "Params", module = "nsac", skip_from_py_object)]
#[derive(Clone)]
struct PyParams(nsac_core::Params);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (alpha=0.0, beta=1.0, t_end=5.0, cfl_safety=0.4, eta_tilde=1.0, kappa_tilde=1.0))]
    fn new(alpha: f64, beta: f64, t_end: f64, cfl_safety: f64, eta_tilde: f64, kappa_tilde: f64) -> PyResult<Self> {
        let p = nsac_core::Params {
            alpha,
            beta,
            t_end,
            cfl_safety,
            eta_tilde,
            kappa_tilde,
            ..nsac_core::Params::default()
        };
        p.validate().map_err(to_py)?;
        Ok(PyParams(p))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.0.t_end
    }

    #[getter]
    fn cfl_safety(&self) -> f64 {
        self.0.cfl_safety
    }

    fn eta(&self, chi: f64) -> f64 {
        self.0.eta(chi)
    }

    fn kappa(&self, theta: f64) -> f64 {
        self.0.kappa(theta)
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(alpha={}, beta={}, t_end={}, cfl_safety={})",
            self.0.alpha, self.0.beta, self.0.t_end, self.0.cfl_safety
        )
    }
}

/// The unknowns `v, u, chi, theta` at time `t`, plus the cached `mu`.
#[pyclass(name = "FieldState", module = "nsac", skip_from_py_object, frozen)]
#[derive(Clone)]
struct PyFieldState(nsac_core::FieldState);

#[pymethods]
impl PyFieldState {
    #[new]
    #[pyo3(signature = (grid, v, u, chi, theta, t=0.0))]
    fn new(grid: &PyGrid, v: Vec<f64>, u: Vec<f64>, chi: Vec<f64>, theta: Vec<f64>, t: f64) -> PyResult<Self> {
        nsac_core::FieldState::new(&grid.0, t, v, u, chi, theta).map(PyFieldState).map_err(to_py)
    }

    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.0.v.clone()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.0.u.clone()
    }

    #[getter]
    fn chi(&self) -> Vec<f64> {
        self.0.chi.clone()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.theta.clone()
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.0.mu.clone()
    }

    fn __repr__(&self) -> String {
        format!("FieldState(t={}, nodes={})", self.0.t, self.0.len())
    }
}

/// Snapshots on a uniform time lattice with the running time integrals.
#[pyclass(name = "History", module = "nsac", frozen)]
struct PyHistory(nsac_core::History);

#[pymethods]
impl PyHistory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.snapshots().iter().map(|s| s.state.t).collect()
    }

    #[getter]
    fn w_integral(&self) -> f64 {
        self.0.current().w_integral
    }

    fn snapshot(&self, t: f64) -> PyResult<PyFieldState> {
        Ok(PyFieldState(self.0.snapshot_at(t).map_err(to_py)?.state.clone()))
    }

    /// Volume rebuilt from the history at time `t`: a dict with `v_repr`,
    /// `v_sim`, `residual_max`, `residual_l2`, `alpha0` and `b_value`.
    fn reconstruct_v<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = nsac_core::reconstruct_v(&self.0, t).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("t", r.t)?;
        d.set_item("v_repr", r.v_repr)?;
        d.set_item("v_sim", r.v_sim)?;
        d.set_item("residual_max", r.residual_max)?;
        d.set_item("residual_l2", r.residual_l2)?;
        d.set_item("alpha0", r.alpha0)?;
        d.set_item("b_value", r.b_value)?;
        Ok(d)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::output::write_history(&path, &self.0).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::output::read_history(&path).map(PyHistory).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.snapshots().len()
    }
}

/// Builds `steady` or `cosine` initial data; cosine amplitudes default to the
/// standard perturbation.
#[pyfunction]
#[pyo3(signature = (grid, preset="cosine", amp_v=None, amp_u=None, amp_chi=None, chi_base=None, amp_theta=None, theta_base=None))]
#[allow(clippy::too_many_arguments)]
fn make_initial_state(
    grid: &PyGrid,
    preset: &str,
    amp_v: Option<f64>,
    amp_u: Option<f64>,
    amp_chi: Option<f64>,
    chi_base: Option<f64>,
    amp_theta: Option<f64>,
    theta_base: Option<f64>,
) -> PyResult<PyFieldState> {
    let d = CosineAmplitudes::default();
    let preset = match preset {
        "steady" => nsac_core::Preset::Steady,
        "cosine" => nsac_core::Preset::Cosine(CosineAmplitudes {
            amp_v: amp_v.unwrap_or(d.amp_v),
            amp_u: amp_u.unwrap_or(d.amp_u),
            amp_chi: amp_chi.unwrap_or(d.amp_chi),
            chi_base: chi_base.unwrap_or(d.chi_base),
            amp_theta: amp_theta.unwrap_or(d.amp_theta),
            theta_base: theta_base.unwrap_or(d.theta_base),
        }),
        other => return Err(PyValueError::new_err(format!("unknown preset '{other}'"))),
    };
    nsac_core::make_initial_state(&grid.0, &preset).map(PyFieldState).map_err(to_py)
}

/// Rescales the initial data to unit mass and unit total energy.
#[pyfunction]
fn normalize_initial_data(grid: &PyGrid, state: &PyFieldState, params: &PyParams) -> PyResult<PyFieldState> {
    nsac_core::normalize_initial_data(&grid.0, &state.0, &params.0)
        .map(|n| PyFieldState(n.state))
        .map_err(to_py)
}

type Tendencies = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// `(dv_dt, du_dt, dchi_dt, dtheta_dt)`.
#[pyfunction]
fn eval_rhs(grid: &PyGrid, state: &PyFieldState, params: &PyParams) -> PyResult<Tendencies> {
    let r = nsac_core::eval_rhs(&grid.0, &state.0, &params.0).map_err(to_py)?;
    Ok((r.dv_dt, r.du_dt, r.dchi_dt, r.dtheta_dt))
}

#[pyfunction]
fn stable_time_step(grid: &PyGrid, state: &PyFieldState, params: &PyParams) -> f64 {
    stable_dt(&grid.0, &state.0, &params.0)
}

#[pyfunction]
fn step_rk(grid: &PyGrid, state: &PyFieldState, dt: f64, params: &PyParams) -> PyResult<PyFieldState> {
    nsac_core::step_rk(&grid.0, &state.0, dt, &params.0).map(PyFieldState).map_err(to_py)
}

/// Integrates to `t_end` (default `params.t_end`) and returns the final
/// state with the recorded history.
#[pyfunction]
#[pyo3(signature = (grid, state, params, t_end=None, snapshot_dt=None))]
fn advance(
    py: Python<'_>,
    grid: &PyGrid,
    state: &PyFieldState,
    params: &PyParams,
    t_end: Option<f64>,
    snapshot_dt: Option<f64>,
) -> PyResult<(PyFieldState, PyHistory)> {
    let t_end = t_end.unwrap_or(params.0.t_end);
    let (g, s, p) = (grid.0.clone(), state.0.clone(), params.0.clone());
    py.detach(move || {
        let interval = snapshot_dt.unwrap_or_else(|| default_snapshot_interval(&g, t_end - s.t));
        let mut history = nsac_core::History::new(&g, &p, &s, interval)?;
        let end = nsac_core::advance(&g, &s, t_end, &p, &mut history)?;
        Ok((PyFieldState(end), PyHistory(history)))
    })
    .map_err(to_py)
}

/// `(mass, total_energy)`.
#[pyfunction]
fn conserved_quantities(grid: &PyGrid, state: &PyFieldState) -> PyResult<(f64, f64)> {
    diag::conserved_quantities(&grid.0, &state.0).map_err(to_py)
}

#[pyfunction]
fn lyapunov(grid: &PyGrid, state: &PyFieldState) -> PyResult<f64> {
    diag::lyapunov(&grid.0, &state.0).map_err(to_py)
}

#[pyfunction]
fn dissipation(grid: &PyGrid, state: &PyFieldState, params: &PyParams) -> PyResult<f64> {
    diag::dissipation(&grid.0, &state.0, &params.0).map_err(to_py)
}

#[pyfunction]
fn sobolev_e(grid: &PyGrid, state: &PyFieldState) -> PyResult<f64> {
    diag::sobolev_e(&grid.0, &state.0).map_err(to_py)
}

/// Parses `key=value` configuration text.
fn config(text: &str, output_dir: Option<PathBuf>) -> PyResult<RunConfig> {
    let mut cfg = io::parse_config(text).map_err(to_py)?;
    if output_dir.is_some() {
        cfg.output_dir = output_dir;
    }
    Ok(cfg)
}

/// Runs one configuration; returns the summary as an ordered dict of strings.
#[pyfunction]
#[pyo3(signature = (config_text="", output_dir=None))]
fn run_single<'py>(py: Python<'py>, config_text: &str, output_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(config_text, output_dir)?;
    let summary = py.detach(|| io::run_single(&cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    for (k, v) in summary.to_pairs() {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Refinement study; returns the table as CSV text.
#[pyfunction]
#[pyo3(signature = (config_text="", levels=3))]
fn run_refinement(py: Python<'_>, config_text: &str, levels: usize) -> PyResult<String> {
    let cfg = config(config_text, None)?;
    let table = py.detach(|| io::run_refinement(&cfg, levels)).map_err(to_py)?;
    Ok(table.to_csv())
}

#[pymodule]
fn nsac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyFieldState>()?;
    m.add_class::<PyHistory>()?;
    m.add_function(wrap_pyfunction!(make_initial_state, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_initial_data, m)?)?;
    m.add_function(wrap_pyfunction!(eval_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(stable_time_step, m)?)?;
    m.add_function(wrap_pyfunction!(step_rk, m)?)?;
    m.add_function(wrap_pyfunction!(advance, m)?)?;
    m.add_function(wrap_pyfunction!(conserved_quantities, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(dissipation, m)?)?;
    m.add_function(wrap_pyfunction!(sobolev_e, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(run_refinement, m)?)?;
    Ok(())
}
