//! Python bindings: configs, single runs, stepping and the studies.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nullwave::energy::EnergyReport;
use nullwave::solver::{Advance, BlowupCause, BlowupEvent};
use nullwave::{experiments, geometry, nullform, solver};

fn to_py(e: nullwave::Error) -> PyErr {
    if e.is_config() || matches!(e, nullwave::Error::Domain(_) | nullwave::Error::Dimension { .. }) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn report_dict<'py>(py: Python<'py>, r: &EnergyReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("e0", r.e0)?;
    d.set_item("e1", r.e1)?;
    d.set_item("f0", r.f0)?;
    d.set_item("f1", r.f1)?;
    d.set_item("e_total", r.e_total)?;
    d.set_item("f_total", r.f_total)?;
    d.set_item("ratio", r.ratio)?;
    d.set_item("sup_wL", r.sup_wl)?;
    d.set_item("sup_wLbar", r.sup_wlbar)?;
    d.set_item("mixed_sup", r.mixed.sup)?;
    d.set_item("mixed_l2", r.mixed.l2)?;
    d.set_item("st_int_k0", r.st_integral[0])?;
    d.set_item("st_int_k1", r.st_integral[1])?;
    Ok(d)
}

fn event_dict<'py>(py: Python<'py>, ev: &BlowupEvent) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", ev.t)?;
    let cause = match ev.cause {
        BlowupCause::Threshold => "threshold",
        BlowupCause::StepFailure { .. } => "step-failure",
        BlowupCause::NumericalFailure => "numerical-failure",
    };
    d.set_item("cause", cause)?;
    d.set_item("peak", ev.peak)?;
    Ok(d)
}

/// A validated run configuration.
#[pyclass(name = "Config", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: nullwave::RunConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: nullwave::parse_config(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: nullwave::config::load_config(path.as_ref()).map_err(to_py)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.grid.m
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.grid.h
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }

    #[getter]
    fn fields(&self) -> usize {
        self.inner.spec.fields()
    }

    #[getter]
    fn is_null(&self) -> bool {
        self.inner.spec.is_null()
    }

    #[getter]
    fn theorem_regime(&self) -> bool {
        self.inner.data.is_theorem_regime()
    }

    fn with_eps(&self, eps: f64) -> PyResult<Self> {
        let c = self.inner.clone().with_eps(eps);
        c.validate().map_err(to_py)?;
        Ok(Self { inner: c })
    }

    fn with_grid(&self, m: usize) -> PyResult<Self> {
        let g = solver::Grid::new(self.inner.grid.x_min, self.inner.grid.x_max, m).map_err(to_py)?;
        let c = self.inner.clone().with_grid(g);
        c.validate().map_err(to_py)?;
        Ok(Self { inner: c })
    }
}

/// A run advanced one step at a time.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    inner: solver::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        Ok(Self { inner: solver::Simulation::from_config(&config.inner).map_err(to_py)? })
    }

    /// Advances one step; returns `False` once the blow-up threshold is crossed.
    fn step(&mut self) -> PyResult<bool> {
        match self.inner.advance().map_err(to_py)? {
            Advance::Stepped => Ok(true),
            Advance::Threshold(_) => Ok(false),
        }
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.state().t
    }

    #[getter]
    fn e_initial(&self) -> f64 {
        self.inner.e_initial()
    }

    fn phi(&self, field: usize) -> PyResult<Vec<f64>> {
        self.slice(field).map(|f| f.phi.clone())
    }

    fn p(&self, field: usize) -> PyResult<Vec<f64>> {
        self.slice(field).map(|f| f.p.clone())
    }

    fn q(&self, field: usize) -> PyResult<Vec<f64>> {
        self.slice(field).map(|f| f.q.clone())
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        report_dict(py, &self.inner.report())
    }
}

impl PySimulation {
    fn slice(&self, field: usize) -> PyResult<&solver::FieldSlice> {
        self.inner
            .state()
            .fields
            .get(field)
            .ok_or_else(|| PyValueError::new_err(format!("no field {field}")))
    }
}

/// Runs a config; returns reports, the initial energy and any blow-up event.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let out = py.detach(|| solver::run(&cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    let reports = out.reports.iter().map(|r| report_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    d.set_item("reports", reports)?;
    d.set_item("e_initial", out.e_initial)?;
    d.set_item("steps", out.steps)?;
    d.set_item("theorem_regime", out.theorem_regime)?;
    match &out.blowup {
        Some(ev) => d.set_item("blowup", event_dict(py, ev)?)?,
        None => d.set_item("blowup", py.None())?,
    }
    Ok(d)
}

#[pyfunction]
fn detect_blowup<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Option<Bound<'py, PyDict>>> {
    let cfg = config.inner.clone();
    let est = py.detach(|| experiments::detect_blowup(&cfg)).map_err(to_py)?;
    est.map(|b| {
        let d = PyDict::new(py);
        d.set_item("t_blow", b.t_blow)?;
        d.set_item("gap", b.gap)?;
        d.set_item("low_confidence", b.low_confidence)?;
        Ok(d)
    })
    .transpose()
}

fn study_dict<'py>(py: Python<'py>, r: &experiments::StudyResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let rungs: Vec<(f64, usize, f64, f64, f64, bool)> =
        r.rungs.iter().map(|g| (g.h, g.m, g.eps, g.value, g.aux, g.censored)).collect();
    d.set_item("rungs", rungs)?;
    d.set_item("fitted", r.fitted.clone())?;
    d.set_item("conclusive", r.is_conclusive())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config, refinements = 3))]
fn convergence_study<'py>(py: Python<'py>, config: &PyConfig, refinements: usize) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let r = py.detach(|| experiments::convergence_study(&cfg, refinements)).map_err(to_py)?;
    study_dict(py, &r)
}

#[pyfunction]
fn increment_scaling<'py>(py: Python<'py>, config: &PyConfig, ladder: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let r = py.detach(|| experiments::increment_scaling(&cfg, &ladder)).map_err(to_py)?;
    study_dict(py, &r)
}

#[pyfunction]
fn lifespan_sweep<'py>(py: Python<'py>, config: &PyConfig, ladder: Vec<f64>, t_cap: f64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let r = py.detach(|| experiments::lifespan_sweep(&cfg, &ladder, t_cap)).map_err(to_py)?;
    study_dict(py, &r)
}

#[pyfunction]
fn john_oracle(a: f64) -> Option<f64> {
    experiments::john_oracle(a)
}

/// Cartesian coefficients `(tt, tx, xt, xx)` to null-frame `(pp, pq, qp, qq)`.
#[pyfunction]
fn to_null_frame(tt: f64, tx: f64, xt: f64, xx: f64) -> PyResult<(f64, f64, f64, f64)> {
    let q = nullform::QuadraticForm::new(tt, tx, xt, xx).map_err(to_py)?;
    let c = nullform::to_null_frame(&q);
    Ok((c.pp, c.pq, c.qp, c.qq))
}

#[pyfunction]
#[pyo3(signature = (tt, tx, xt, xx, tol = 0.0))]
fn is_null(tt: f64, tx: f64, xt: f64, xx: f64, tol: f64) -> PyResult<bool> {
    let q = nullform::QuadraticForm::new(tt, tx, xt, xx).map_err(to_py)?;
    Ok(nullform::is_null(&q, tol))
}

#[pyfunction]
fn weight_value(delta: f64, s: f64) -> PyResult<f64> {
    let w = geometry::WeightSpec::new(delta).map_err(to_py)?;
    geometry::weight_value(&w, s).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "nullwave")]
fn nullwave_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(detect_blowup, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_study, m)?)?;
    m.add_function(wrap_pyfunction!(increment_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(lifespan_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(john_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(to_null_frame, m)?)?;
    m.add_function(wrap_pyfunction!(is_null, m)?)?;
    m.add_function(wrap_pyfunction!(weight_value, m)?)?;
    Ok(())
}
