//! Python bindings: specs from JSON configs, the exact simulator, the
//! two-qubit closed forms, sweeps and the invariant checker.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use num_complex::Complex64;
use twostroke::analytic::{
    build_affine_maps, derive_params, relaxation_rate, steady_state, trajectory, work_closed_form, AnalyticInputs,
    AnalyticParams as CoreParams, ObservableVector,
};
use twostroke::config::EngineConfig;
use twostroke::emit::{Cell, Table};
use twostroke::engine::EngineSpec as CoreSpec;
use twostroke::hilbert::{DensityMatrix, LayoutMatrix};
use twostroke::strobe::{Engine as CoreEngine, InitialState, LimitCycleOptions, SolverMethod};
use twostroke::sweep::{run_sweep, SweepOptions, SweepPlan};
use twostroke::verify::{verify, VerifyOptions};
use twostroke::Error;

create_exception!(
    twostroke_py,
    ConfigError,
    PyValueError,
    "Invalid config, spec or parameter."
);
create_exception!(
    twostroke_py,
    SolverError,
    PyRuntimeError,
    "Limit-cycle solver or consistency failure."
);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Convergence { .. } | Error::Degenerate { .. } | Error::Singular(_) | Error::Consistency(_) => {
            SolverError::new_err(e.to_string())
        }
        _ => ConfigError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for twostroke::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn rows<'py>(py: Python<'py>, table: &Table) -> PyResult<Bound<'py, PyList>> {
    let list = PyList::empty(py);
    for row in &table.rows {
        let d = PyDict::new(py);
        for (k, cell) in table.columns.iter().zip(row) {
            match cell {
                Cell::Float(x) => d.set_item(k, *x)?,
                Cell::Int(i) => d.set_item(k, *i)?,
                Cell::Text(s) => d.set_item(k, s)?,
                Cell::Missing => d.set_item(k, py.None())?,
            }
        }
        list.append(d)?;
    }
    Ok(list)
}

fn matrix(rho: &DensityMatrix) -> Vec<Vec<Complex64>> {
    let m = rho.matrix();
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn observables<'py>(py: Python<'py>, x: &ObservableVector) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("Z1", x.z1)?;
    d.set_item("Z2", x.z2)?;
    d.set_item("S", x.s)?;
    d.set_item("A", x.a)?;
    Ok(d)
}

/// Engine description, built from the JSON config schema.
#[pyclass(frozen, skip_from_py_object, module = "twostroke_py")]
#[derive(Clone)]
struct EngineSpec {
    inner: CoreSpec,
    initial: InitialState,
}

#[pymethods]
impl EngineSpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let cfg = EngineConfig::from_json(text).py()?;
        Ok(Self {
            inner: cfg.to_spec().py()?,
            initial: cfg.initial_state().py()?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let cfg = EngineConfig::load(path).py()?;
        Ok(Self {
            inner: cfg.to_spec().py()?,
            initial: cfg.initial_state().py()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        EngineConfig::from_spec(&self.inner).py()?.to_json().py()
    }

    #[getter]
    fn num_sites(&self) -> usize {
        self.inner.num_sites()
    }

    #[getter]
    fn frequencies(&self) -> Option<Vec<f64>> {
        self.inner.frequencies()
    }

    #[getter]
    fn tau_q(&self) -> f64 {
        self.inner.tau_q()
    }

    #[getter]
    fn tau_w(&self) -> f64 {
        self.inner.tau_w()
    }

    fn with_durations(&self, tau_q: f64, tau_w: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_durations(tau_q, tau_w).py()?,
            initial: self.initial.clone(),
        })
    }

    /// Largest commutator norms `([V_C, H_1 + H_C], [V_H, H_N + H_H])`.
    fn energy_conservation_defect(&self) -> (f64, f64) {
        twostroke::engine::check_strict_energy_conservation(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "EngineSpec(num_sites={}, tau_q={}, tau_w={})",
            self.inner.num_sites(),
            self.inner.tau_q(),
            self.inner.tau_w()
        )
    }
}

/// Precomputed strokes of one engine.
#[pyclass(frozen, module = "twostroke_py")]
struct Engine {
    inner: CoreEngine,
    initial: InitialState,
}

fn initial_state(name: Option<&str>, default: &InitialState) -> PyResult<InitialState> {
    name.map_or(Ok(default.clone()), |s| s.parse().py())
}

#[pymethods]
impl Engine {
    #[new]
    fn new(spec: &EngineSpec) -> PyResult<Self> {
        Ok(Self {
            inner: CoreEngine::new(&spec.inner).py()?,
            initial: spec.initial.clone(),
        })
    }

    /// Per-cycle ledger rows from the initial state.
    #[pyo3(signature = (cycles = 100, initial = None))]
    fn run_cycles<'py>(&self, py: Python<'py>, cycles: usize, initial: Option<&str>) -> PyResult<Bound<'py, PyList>> {
        let rho0 = self.inner.initial_state(&initial_state(initial, &self.initial)?).py()?;
        let ledger = self.inner.run_cycles(&rho0, cycles, false).py()?;
        rows(py, &Table::from(&ledger))
    }

    /// Limit-cycle report; `rho_star` and `rho_tilde_star` are nested lists.
    #[pyo3(signature = (method = "spectral", tol = 1e-12, max_cycles = 100_000, initial = None))]
    fn limit_cycle<'py>(
        &self,
        py: Python<'py>,
        method: &str,
        tol: f64,
        max_cycles: usize,
        initial: Option<&str>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let options = LimitCycleOptions {
            method: method.parse::<SolverMethod>().py()?,
            tol,
            max_cycles,
            initial: initial_state(initial, &self.initial)?,
        };
        let report = self.inner.find_limit_cycle(&options).py()?;
        let d = rows(py, &Table::from(&report))?.get_item(0)?.cast_into::<PyDict>()?;
        d.set_item("internal_drift", report.internal_drift.clone())?;
        d.set_item("rho_star", matrix(&report.rho_star))?;
        d.set_item("rho_tilde_star", matrix(&report.rho_tilde_star))?;
        Ok(d)
    }

    /// One row per invariant check.
    #[pyo3(signature = (cycles = 50))]
    fn verify<'py>(&self, py: Python<'py>, cycles: usize) -> PyResult<Bound<'py, PyList>> {
        let options = VerifyOptions {
            cycles,
            solver: LimitCycleOptions {
                initial: self.initial.clone(),
                ..Default::default()
            },
        };
        rows(py, &verify(self.inner.spec(), &options).py()?.to_table())
    }
}

/// Two-qubit closed forms for a partial-swap spec with resonant ancillas.
#[pyclass(frozen, module = "twostroke_py")]
struct AnalyticModel {
    params: CoreParams,
    x0: ObservableVector,
}

#[pymethods]
impl AnalyticModel {
    #[new]
    #[pyo3(signature = (spec, lam = None, p = None))]
    fn new(spec: &EngineSpec, lam: Option<f64>, p: Option<f64>) -> PyResult<Self> {
        let base = CoreParams::from_spec(&spec.inner).py()?;
        let params = derive_params(AnalyticInputs {
            lambda: lam,
            p,
            ..base.inputs
        })
        .py()?;
        let engine = CoreEngine::new(&spec.inner).py()?;
        let rho0 = engine.initial_state(&spec.initial).py()?;
        Ok(Self {
            params,
            x0: ObservableVector::from_state(&rho0).py()?,
        })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.params.lambda
    }

    #[getter]
    fn p(&self) -> f64 {
        self.params.p
    }

    /// `μ = max|eig(DJ)|`
    fn relaxation_rate(&self) -> f64 {
        relaxation_rate(&build_affine_maps(&self.params))
    }

    fn work_closed_form(&self) -> f64 {
        work_closed_form(&self.params)
    }

    #[pyo3(signature = (steps = 100))]
    fn trajectory<'py>(&self, py: Python<'py>, steps: usize) -> PyResult<Bound<'py, PyList>> {
        let points = trajectory(&self.x0, steps, &build_affine_maps(&self.params));
        rows(py, &Table::from(points.as_slice()))
    }

    /// `{"x": …, "x_tilde": …}` at the steady state.
    fn steady_state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = steady_state(&build_affine_maps(&self.params)).py()?;
        let d = PyDict::new(py);
        d.set_item("x", observables(py, &s.x)?)?;
        d.set_item("x_tilde", observables(py, &s.x_tilde)?)?;
        Ok(d)
    }
}

/// Runs the "sweep" block of a JSON config; one dict per grid point.
#[pyfunction]
#[pyo3(signature = (config_json, jobs = 0))]
fn sweep<'py>(py: Python<'py>, config_json: &str, jobs: usize) -> PyResult<Bound<'py, PyList>> {
    let cfg = EngineConfig::from_json(config_json).py()?;
    let block = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::new_err("the config has no \"sweep\" block"))?;
    let plan = SweepPlan::from_config(cfg.to_spec().py()?, block).py()?;
    let options = SweepOptions {
        solver: LimitCycleOptions {
            initial: cfg.initial_state().py()?,
            ..Default::default()
        },
        jobs,
    };
    let result = py.detach(|| run_sweep(&plan, &options)).py()?;
    rows(py, &result.to_table())
}

#[pymodule]
fn twostroke_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<EngineSpec>()?;
    m.add_class::<Engine>()?;
    m.add_class::<AnalyticModel>()?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    Ok(())
}
