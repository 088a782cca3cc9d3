//! Python bindings: engine parameters, limit-cycle solves with their figures
//! of merit, the moment solver, sweeps and piston Wigner functions.
//!
//! Results that are plain records come back as `dict`s built from the same
//! serde representation the command-line tool writes to JSON.

use otto_core::lindblad::Propagator;
use otto_core::model::{is_stable, max_stable_nbar_h};
use otto_core::moments::{moment_limit_cycle, Closure, MomentOptions, MomentState, Variant};
use otto_core::states::{default_axis, partial_trace, symmetric_axis, wigner as wigner_grid};
use otto_core::thermo::{self, CycleDiagram, CycleRun, SweepAxis};
use otto_core::{
    build_liouvillian, evolve, Backend, CouplingKind, DensityMatrix, DriveMode, EngineParams, Error, Mode, RecordMode,
    SolverOptions,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(otto_engine, ConvergenceError, PyRuntimeError, "A solver failed to converge or diverged.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. }
        | Error::Divergence { .. }
        | Error::InvariantViolation { .. }
        | Error::StepUnderflow { .. }
        | Error::OpenCycle(_) => ConvergenceError::new_err(e.to_string()),
        Error::InvalidParameter { .. }
        | Error::InvalidArgument(_)
        | Error::InvalidDimension(_)
        | Error::DimensionMismatch(_)
        | Error::Unsupported(_)
        | Error::UndefinedTemperature(_) => PyValueError::new_err(e.to_string()),
    }
}

/// Parses a snake_case enum name through its serde representation.
fn parse_enum<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} '{name}'")))
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Converts any serialisable value into Python objects via `json.loads`.
fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn solver_options(backend: &str, samples_per_period: Option<usize>, tol: Option<f64>, max_cycles: Option<usize>) -> PyResult<SolverOptions> {
    let mut opts = SolverOptions { backend: backend.parse::<Backend>().map_err(to_py)?, ..SolverOptions::default() };
    if let Some(n) = samples_per_period {
        opts.samples_per_period = n;
    }
    if let Some(t) = tol {
        opts.tol = t;
    }
    if let Some(m) = max_cycles {
        opts.max_cycles = m;
    }
    opts.validate().map_err(to_py)?;
    Ok(opts)
}

/// Physical constants of one engine. Keyword arguments override the
/// baseline; all rates are in units of the mechanical frequency.
#[pyclass(name = "EngineParams", module = "otto_engine", skip_from_py_object)]
#[derive(Clone)]
pub struct PyEngineParams {
    inner: EngineParams,
}

#[pymethods]
impl PyEngineParams {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut p = Self { inner: EngineParams::baseline() };
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                p.set(&k.extract::<String>()?, &v)?;
            }
        }
        Ok(p)
    }

    /// Sets one field by name.
    fn set(&mut self, name: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let p = &mut self.inner;
        match name {
            "omega_a" => p.omega_a = value.extract()?,
            "omega_b" => p.omega_b = value.extract()?,
            "g" => p.g = value.extract()?,
            "kappa_a" => p.kappa_a = value.extract()?,
            "kappa_b" => p.kappa_b = value.extract()?,
            "kappa_h" => p.kappa_h = value.extract()?,
            "kappa_l" => p.kappa_l = value.extract()?,
            "nbar_a" => p.nbar_a = value.extract()?,
            "nbar_b" => p.nbar_b = value.extract()?,
            "nbar_h" => p.nbar_h = value.extract()?,
            "dim_a" => p.dim_a = value.extract()?,
            "dim_b" => p.dim_b = value.extract()?,
            "coupling" => p.coupling = parse_enum::<CouplingKind>("coupling", &value.extract::<String>()?)?,
            "drive_mode" => p.drive_mode = parse_enum::<DriveMode>("drive mode", &value.extract::<String>()?)?,
            other => return Err(PyValueError::new_err(format!("unknown parameter '{other}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    fn is_stable(&self) -> bool {
        is_stable(&self.inner)
    }

    /// Largest hot-bath occupation inside the stability bound.
    fn max_stable_nbar_h(&self) -> f64 {
        max_stable_nbar_h(&self.inner)
    }

    #[getter]
    fn drive_period(&self) -> f64 {
        self.inner.drive_period()
    }

    #[getter]
    fn coupling(&self) -> String {
        enum_name(&self.inner.coupling)
    }

    #[getter]
    fn drive_mode(&self) -> String {
        enum_name(&self.inner.drive_mode)
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        (self.inner.dim_a, self.inner.dim_b)
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_object(py, &self.inner)
    }

    fn __getattr__(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        let dict = self.to_dict(py)?;
        dict.bind(py)
            .get_item(name)
            .map(|v| v.unbind())
            .map_err(|_| pyo3::exceptions::PyAttributeError::new_err(format!("no parameter '{name}'")))
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "EngineParams(g={}, nbar_h={}, kappa_l={}, coupling='{}', dims=({}, {}))",
            p.g,
            p.nbar_h,
            p.kappa_l,
            p.coupling.name(),
            p.dim_a,
            p.dim_b
        )
    }
}

fn diagram_columns(py: Python<'_>, d: &CycleDiagram) -> PyResult<Py<PyAny>> {
    let out = PyDict::new(py);
    let s = &d.samples;
    out.set_item("t", s.iter().map(|p| p.t).collect::<Vec<_>>())?;
    out.set_item("omega_eff", s.iter().map(|p| p.omega_eff).collect::<Vec<_>>())?;
    out.set_item("n_a", s.iter().map(|p| p.n_a).collect::<Vec<_>>())?;
    out.set_item("U_a", s.iter().map(|p| p.u_a).collect::<Vec<_>>())?;
    out.set_item("S_a", s.iter().map(|p| p.s_a).collect::<Vec<_>>())?;
    out.set_item("T_eff", s.iter().map(|p| p.t_eff).collect::<Vec<_>>())?;
    out.set_item("drive", s.iter().map(|p| p.drive_on).collect::<Vec<_>>())?;
    out.set_item("branch", s.iter().map(|p| p.branch.name()).collect::<Vec<_>>())?;
    out.set_item("closed", d.closed)?;
    Ok(out.into_any().unbind())
}

/// Converged limit cycle of the master equation.
#[pyclass(name = "CycleResult", module = "otto_engine")]
pub struct PyCycleResult {
    run: CycleRun,
}

#[pymethods]
impl PyCycleResult {
    #[getter]
    fn cycles(&self) -> usize {
        self.run.trajectory.cycles
    }

    #[getter]
    fn residual(&self) -> Option<f64> {
        self.run.trajectory.cycle_residual
    }

    /// Work, heat intake and efficiency of the effective cycle, or `None`
    /// when the sampled cycle does not close.
    fn work(&self, py: Python<'_>) -> PyResult<Option<Py<PyAny>>> {
        thermo::cycle_work(&self.run.diagram).ok().map(|w| to_object(py, &w)).transpose()
    }

    /// Every engine figure of merit as a dict.
    fn foms(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_object(py, &thermo::engine_foms(&self.run).map_err(to_py)?)
    }

    /// Column-wise samples of the effective cycle.
    fn diagram(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        diagram_columns(py, &self.run.diagram)
    }

    /// Column-wise observables over the recorded period.
    fn observables(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let obs: Vec<_> = self.run.trajectory.samples.iter().map(|s| s.obs).collect();
        let out = PyDict::new(py);
        out.set_item("t", self.run.trajectory.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
        out.set_item("n_a", obs.iter().map(|o| o.n_a).collect::<Vec<_>>())?;
        out.set_item("n_b", obs.iter().map(|o| o.n_b).collect::<Vec<_>>())?;
        out.set_item("q2", obs.iter().map(|o| o.q2).collect::<Vec<_>>())?;
        out.set_item("p2", obs.iter().map(|o| o.p2).collect::<Vec<_>>())?;
        out.set_item("S_a", obs.iter().map(|o| o.s_a).collect::<Vec<_>>())?;
        Ok(out.into_any().unbind())
    }
}

/// Iterates drive periods to the limit cycle and records one period.
#[pyfunction]
#[pyo3(signature = (params, backend = "auto", samples_per_period = None, tol = None, max_cycles = None))]
fn solve_cycle(
    py: Python<'_>,
    params: PyRef<'_, PyEngineParams>,
    backend: &str,
    samples_per_period: Option<usize>,
    tol: Option<f64>,
    max_cycles: Option<usize>,
) -> PyResult<PyCycleResult> {
    let opts = solver_options(backend, samples_per_period, tol, max_cycles)?;
    let p = params.inner.clone();
    let run = py.detach(|| thermo::solve_cycle(&p, &opts)).map_err(to_py)?;
    Ok(PyCycleResult { run })
}

/// Master-equation trajectory from the thermal initial state.
#[pyfunction]
#[pyo3(signature = (params, t_final, sample_every, backend = "auto"))]
fn simulate(
    py: Python<'_>,
    params: PyRef<'_, PyEngineParams>,
    t_final: f64,
    sample_every: f64,
    backend: &str,
) -> PyResult<Py<PyAny>> {
    let opts = SolverOptions { record_mode: RecordMode::ObservablesOnly, ..solver_options(backend, None, None, None)? };
    let p = params.inner.clone();
    let traj = py
        .detach(|| {
            let l = build_liouvillian(&p)?;
            evolve(&DensityMatrix::initial(&p), &l, &p.schedule(), t_final, sample_every, &opts)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", traj.samples.iter().map(|s| s.t).collect::<Vec<_>>())?;
    out.set_item("n_a", traj.column(|o| o.n_a))?;
    out.set_item("n_b", traj.column(|o| o.n_b))?;
    out.set_item("q2", traj.column(|o| o.q2))?;
    out.set_item("p2", traj.column(|o| o.p2))?;
    out.set_item("S_a", traj.column(|o| o.s_a))?;
    out.set_item("drive", traj.samples.iter().map(|s| s.drive_on).collect::<Vec<_>>())?;
    Ok(out.into_any().unbind())
}

/// Limit cycle of the moment hierarchy. Returns the effective-cycle columns
/// plus `n_b`, `work` (or `None`) and the number of periods iterated.
#[pyfunction]
#[pyo3(signature = (params, closure = "mean_field", variant = "rederived", samples_per_period = 1024, tol = 1e-10, max_cycles = 20000))]
fn moment_cycle(
    py: Python<'_>,
    params: PyRef<'_, PyEngineParams>,
    closure: &str,
    variant: &str,
    samples_per_period: usize,
    tol: f64,
    max_cycles: usize,
) -> PyResult<Py<PyAny>> {
    let opts = MomentOptions {
        closure: parse_enum::<Closure>("closure", closure)?,
        variant: parse_enum::<Variant>("variant", variant)?,
        ..MomentOptions::default()
    };
    let p = params.inner.clone();
    let (samples, cycles) = py
        .detach(|| moment_limit_cycle(&MomentState::thermal(&p), &p, &p.schedule(), &opts, samples_per_period, tol, max_cycles))
        .map_err(to_py)?;
    let diagram = CycleDiagram::from_moments(&samples, &p).map_err(to_py)?;
    let out = diagram_columns(py, &diagram)?;
    let d = out.bind(py).cast::<PyDict>()?;
    d.set_item("n_b", samples.iter().map(|s| s.state.n_b).collect::<Vec<_>>())?;
    d.set_item("cycles", cycles)?;
    let work = thermo::cycle_work(&diagram).ok().map(|w| to_object(py, &w)).transpose()?;
    d.set_item("work", work)?;
    Ok(out)
}

/// Piston Wigner function at time `t` of a master-equation run. Returns
/// `(q_axis, p_axis, values)` with `values[i][j] = W(q_i, p_j)`.
#[pyfunction]
#[pyo3(signature = (params, t, points = 101, half_width = None, backend = "auto"))]
fn wigner(
    py: Python<'_>,
    params: PyRef<'_, PyEngineParams>,
    t: f64,
    points: usize,
    half_width: Option<f64>,
    backend: &str,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    if !(t >= 0.0) {
        return Err(PyValueError::new_err(format!("t must be >= 0, got {t}")));
    }
    let opts = solver_options(backend, None, None, None)?;
    let p = params.inner.clone();
    let grid = py
        .detach(|| {
            let l = build_liouvillian(&p)?;
            let rho0 = DensityMatrix::initial(&p);
            let mut prop = Propagator::new(&l, &rho0, &opts)?;
            let mut x = prop.pack(&rho0)?;
            prop.advance(&mut x, &p.schedule(), 0.0, t);
            let rho_b = partial_trace(&prop.unpack(&x, t), Mode::Mechanical);
            let w = half_width.unwrap_or_else(|| default_axis(&rho_b).last().copied().unwrap_or(6.0));
            let axis = symmetric_axis(w, points);
            wigner_grid(&rho_b, &axis, &axis)
        })
        .map_err(to_py)?;
    Ok((grid.q_axis, grid.p_axis, grid.values))
}

/// Independent limit-cycle solves along `axis` ("nbar_h" or "kappa_l").
/// Points outside the stability bound come back with status "unstable"
/// unless `include_unstable` is set.
#[pyfunction]
#[pyo3(signature = (params, axis, values, couplings = vec!["quadratic".to_string(), "linear".to_string()], include_unstable = false))]
fn sweep(
    py: Python<'_>,
    params: PyRef<'_, PyEngineParams>,
    axis: &str,
    values: Vec<f64>,
    couplings: Vec<String>,
    include_unstable: bool,
) -> PyResult<Py<PyAny>> {
    let axis: SweepAxis = axis.parse().map_err(to_py)?;
    let couplings = couplings.iter().map(|c| c.parse::<CouplingKind>()).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let p = params.inner.clone();
    let rows =
        py.detach(|| thermo::sweep_with(&p, axis, &values, &couplings, &SolverOptions::default(), include_unstable));
    to_object(py, &rows)
}

#[pymodule]
fn otto_engine(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEngineParams>()?;
    m.add_class::<PyCycleResult>()?;
    m.add_function(wrap_pyfunction!(solve_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(moment_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(wigner, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    Ok(())
}
