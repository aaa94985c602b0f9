//! Python bindings. Structured results come back as plain dicts/lists.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use nlcomp_core::dynamics::{self, attractor_bounds as core_attractor_bounds, equilibria_and_class, theta_classify as core_theta};
use nlcomp_core::eigenvalue;
use nlcomp_core::numfmt::to_json_string;
use nlcomp_core::runner::{emit_outputs, execute_scenario, ScenarioConfig};
use nlcomp_core::simulator::{self, GeneralParams};
use nlcomp_core::{validate_kernel, KernelSpec, ValidatedKernel};

create_exception!(nlcomp, NlcompError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    NlcompError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = to_json_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "ModelParams", module = "nlcomp", from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: nlcomp_core::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (d1=1.0, d2=1.0, k=0.5, h_comp=0.5, gamma=1.0, mu=5.0, h0=2.0))]
    fn new(d1: f64, d2: f64, k: f64, h_comp: f64, gamma: f64, mu: f64, h0: f64) -> PyResult<Self> {
        let inner = nlcomp_core::ModelParams { d1, d2, k, h_comp, gamma, mu, h0 };
        inner.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn d1(&self) -> f64 {
        self.inner.d1
    }
    #[getter]
    fn d2(&self) -> f64 {
        self.inner.d2
    }
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }
    #[getter]
    fn h_comp(&self) -> f64 {
        self.inner.h_comp
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }
    #[getter]
    fn h0(&self) -> f64 {
        self.inner.h0
    }

    /// Largest explicit time step the simulator accepts from a config file.
    fn stability_bound(&self) -> f64 {
        simulator::stability_bound(&self.inner)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(d1={}, d2={}, k={}, h_comp={}, gamma={}, mu={}, h0={})",
            p.d1, p.d2, p.k, p.h_comp, p.gamma, p.mu, p.h0
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(name = "Kernel", module = "nlcomp", frozen)]
struct PyKernel {
    inner: ValidatedKernel,
}

impl PyKernel {
    fn build(spec: KernelSpec, resolution: f64) -> PyResult<Self> {
        validate_kernel(&spec, resolution).map(|inner| Self { inner }).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

#[pymethods]
impl PyKernel {
    #[staticmethod]
    #[pyo3(signature = (half_width, resolution=None))]
    fn uniform(half_width: f64, resolution: Option<f64>) -> PyResult<Self> {
        Self::build(KernelSpec::Uniform { half_width }, resolution.unwrap_or(half_width / 40.0))
    }

    #[staticmethod]
    #[pyo3(signature = (half_width, resolution=None))]
    fn triangular(half_width: f64, resolution: Option<f64>) -> PyResult<Self> {
        Self::build(KernelSpec::Triangular { half_width }, resolution.unwrap_or(half_width / 40.0))
    }

    #[staticmethod]
    #[pyo3(signature = (sigma, half_width, resolution=None))]
    fn truncated_gaussian(sigma: f64, half_width: f64, resolution: Option<f64>) -> PyResult<Self> {
        Self::build(KernelSpec::TruncatedGaussian { sigma, half_width }, resolution.unwrap_or(half_width / 40.0))
    }

    /// Piecewise-linear density through `(x, density)`.
    #[staticmethod]
    #[pyo3(signature = (x, density, resolution=None))]
    fn tabulated(x: Vec<f64>, density: Vec<f64>, resolution: Option<f64>) -> PyResult<Self> {
        let spec = KernelSpec::Tabulated { x, density };
        let res = resolution.unwrap_or(spec.declared_support() / 40.0);
        Self::build(spec, res)
    }

    #[getter]
    fn support_radius(&self) -> f64 {
        self.inner.support_radius()
    }
    #[getter]
    fn effective_radius(&self) -> f64 {
        self.inner.effective_radius()
    }
    #[getter]
    fn peak(&self) -> f64 {
        self.inner.peak()
    }

    fn __call__(&self, x: f64) -> f64 {
        self.inner.evaluate(x)
    }

    /// `∫_{-∞}^{s} J`.
    fn cdf(&self, s: f64) -> f64 {
        self.inner.cdf(s)
    }

    /// Cell weights `w[m]`, `m = -radius..=radius`.
    fn stencil(&self, dx: f64) -> PyResult<Vec<f64>> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(PyValueError::new_err(format!("dx must be positive, got {dx}")));
        }
        Ok(self.inner.stencil(dx).weights().to_vec())
    }

    fn spec(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, self.inner.spec())
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?})", self.inner.spec())
    }
}

#[derive(Serialize)]
struct EigenOut {
    lambda_p: f64,
    nodes: Vec<f64>,
    eigenfunction: Vec<f64>,
    iterations: usize,
    residual: f64,
}

/// `λ_p` of `d1 (∫_a^b J(x - y) φ(y) dy - φ)` on `(a, b)`, with its eigenfunction.
#[pyfunction]
#[pyo3(signature = (kernel, d1, a, b, dx=None))]
fn principal_eigenvalue(py: Python<'_>, kernel: &PyKernel, d1: f64, a: f64, b: f64, dx: Option<f64>) -> PyResult<Py<PyAny>> {
    let dx = dx.unwrap_or(kernel.inner.support_radius() / 40.0);
    let r = eigenvalue::principal_eigenvalue(&kernel.inner, d1, (a, b), dx).map_err(err)?;
    to_py(
        py,
        &EigenOut {
            lambda_p: r.lambda_p,
            nodes: r.nodes,
            eigenfunction: r.eigenfunction,
            iterations: r.iterations,
            residual: r.residual,
        },
    )
}

/// `[(l, λ_p(0, l))]`; failed entries are NaN.
#[pyfunction]
#[pyo3(signature = (kernel, d1, lengths, dx=None))]
fn eigen_curve(kernel: &PyKernel, d1: f64, lengths: Vec<f64>, dx: Option<f64>) -> Vec<(f64, f64)> {
    let dx = dx.unwrap_or(kernel.inner.support_radius() / 40.0);
    eigenvalue::eigen_curve(&kernel.inner, d1, &lengths, dx)
        .into_iter()
        .map(|(l, r)| (l, r.unwrap_or(f64::NAN)))
        .collect()
}

#[pyfunction]
fn theta_classify(py: Python<'_>, params: &PyModelParams) -> PyResult<Py<PyAny>> {
    to_py(py, &core_theta(&params.inner))
}

#[pyfunction]
fn equilibria(py: Python<'_>, params: &PyModelParams) -> PyResult<Py<PyAny>> {
    to_py(py, &equilibria_and_class(&params.inner))
}

#[pyfunction]
#[pyo3(signature = (k, h_comp, j_max=60))]
fn attractor_bounds(py: Python<'_>, k: f64, h_comp: f64, j_max: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &core_attractor_bounds(k, h_comp, j_max).map_err(err)?)
}

/// RK4 trajectory of the homogeneous system: `{"t": [...], "u": [...], "v": [...], "clip_count": n}`.
#[pyfunction]
#[pyo3(signature = (params, u0, v0, t_end, dt=0.01))]
fn ode_trajectory(py: Python<'_>, params: &PyModelParams, u0: f64, v0: f64, t_end: f64, dt: f64) -> PyResult<Py<PyAny>> {
    let traj = dynamics::ode_trajectory(&params.inner, (u0, v0), t_end, dt).map_err(err)?;
    #[derive(Serialize)]
    struct Out {
        t: Vec<f64>,
        u: Vec<f64>,
        v: Vec<f64>,
        clip_count: usize,
    }
    to_py(py, &Out { t: traj.t, u: traj.u, v: traj.v, clip_count: traj.clip_count })
}

/// Reduce the unreduced coefficients; returns `(ModelParams, {"time_scale", "u_scale", "v_scale"})`.
#[pyfunction]
#[pyo3(signature = (diff1, diff2, a1, b1, c1, a2, b2, c2, mu_hat, h0))]
#[allow(clippy::too_many_arguments)]
fn reduce_general(
    py: Python<'_>,
    diff1: f64,
    diff2: f64,
    a1: f64,
    b1: f64,
    c1: f64,
    a2: f64,
    b2: f64,
    c2: f64,
    mu_hat: f64,
    h0: f64,
) -> PyResult<(PyModelParams, Py<PyAny>)> {
    let general = GeneralParams { diff1, diff2, a1, b1, c1, a2, b2, c2, mu_hat, h0 };
    let (params, transform) = simulator::reduce_general(&general).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((PyModelParams { inner: params }, to_py(py, &transform)?))
}

#[derive(Serialize)]
struct ScenarioOut<'a> {
    report: &'a nlcomp_core::runner::ScenarioReport,
    exit_code: i32,
    x: Vec<f64>,
    u: &'a [f64],
    v: &'a [f64],
    t: Vec<f64>,
    g_front: &'a [f64],
    h_front: &'a [f64],
    mass_u: &'a [f64],
}

/// Run a scenario given as TOML text plus `path=value` overrides.
///
/// Returns the report, the final profile and the front/mass series. Files are written
/// only when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (toml="", overrides=Vec::new(), out_dir=None))]
fn run_scenario(py: Python<'_>, toml: &str, overrides: Vec<String>, out_dir: Option<std::path::PathBuf>) -> PyResult<Py<PyAny>> {
    let cfg = ScenarioConfig::from_toml_str(toml).and_then(|c| c.with_overrides(&overrides)).map_err(err)?;
    let outcome = py.detach(|| execute_scenario(&cfg)).map_err(err)?;
    if let Some(dir) = out_dir {
        emit_outputs(&cfg, &outcome, &dir).map_err(err)?;
    }
    let f = &outcome.final_state;
    let s = &outcome.series;
    let out = ScenarioOut {
        report: &outcome.report,
        exit_code: outcome.exit_code,
        x: (0..f.grid.len).map(|i| f.grid.x(i)).collect(),
        u: &f.u,
        v: &f.v,
        t: s.t.clone(),
        g_front: &s.g_front,
        h_front: &s.h_front,
        mass_u: &s.mass_u,
    };
    to_py(py, &out)
}

/// Normalized TOML of a scenario (defaults filled in), after overrides.
#[pyfunction]
#[pyo3(signature = (toml="", overrides=Vec::new()))]
fn normalize_config(toml: &str, overrides: Vec<String>) -> PyResult<String> {
    let cfg = ScenarioConfig::from_toml_str(toml).and_then(|c| c.with_overrides(&overrides)).map_err(err)?;
    Ok(cfg.to_toml_string())
}

#[pymodule]
pub fn nlcomp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NlcompError", m.py().get_type::<NlcompError>())?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyKernel>()?;
    m.add_function(wrap_pyfunction!(principal_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(eigen_curve, m)?)?;
    m.add_function(wrap_pyfunction!(theta_classify, m)?)?;
    m.add_function(wrap_pyfunction!(equilibria, m)?)?;
    m.add_function(wrap_pyfunction!(attractor_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(ode_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_general, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    Ok(())
}
