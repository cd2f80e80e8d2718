use std::collections::BTreeMap;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use fpt2d::cli::{self, exit_code, RunConfig};
use fpt2d::model::{self, Component, GridSpec, OuParams, WienerParams};
use fpt2d::monte_carlo::{self, SimConfig};
use fpt2d::quad::QuadSpec;
use fpt2d::solver::{self, SolverOutput};
use fpt2d::special::SeriesControl;
use fpt2d::wiener;

fn py_err(e: fpt2d::Error) -> PyErr {
    match exit_code(&e) {
        3 => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for fpt2d::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn component(i: u8) -> PyResult<Component> {
    Component::from_number(i).py()
}

/// A bivariate Wiener or Ornstein-Uhlenbeck process.
#[pyclass(frozen, module = "pyfpt2d")]
struct Model {
    inner: model::Model,
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (mu1, mu2, sigma1=1.0, sigma2=1.0, rho=0.0, x01=0.0, x02=0.0))]
    fn wiener(mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64, x01: f64, x02: f64) -> PyResult<Self> {
        let p = WienerParams::new([mu1, mu2], [sigma1, sigma2], rho, [x01, x02]).py()?;
        Ok(Model { inner: model::Model::Wiener(p) })
    }

    /// `dX_i = (mu_i - X_i / theta) dt + (S dW)_i` with `S = [[s11, s12], [s12, s22]]`.
    #[staticmethod]
    #[pyo3(signature = (mu1, mu2, theta, sigma11, sigma12, sigma22, x01=0.0, x02=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn ou(mu1: f64, mu2: f64, theta: f64, sigma11: f64, sigma12: f64, sigma22: f64, x01: f64, x02: f64) -> PyResult<Self> {
        let p = OuParams::new([mu1, mu2], theta, [[sigma11, sigma12], [sigma12, sigma22]], [x01, x02]).py()?;
        Ok(Model { inner: model::Model::Ou(p) })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            model::Model::Wiener(_) => "wiener",
            model::Model::Ou(_) => "ou",
        }
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

impl Model {
    fn wiener_params(&self) -> PyResult<&WienerParams> {
        self.inner
            .as_wiener()
            .ok_or_else(|| PyValueError::new_err("closed forms need a Wiener model"))
    }
}

#[pyclass(frozen, module = "pyfpt2d")]
struct Boundary {
    inner: model::Boundary,
}

#[pymethods]
impl Boundary {
    #[new]
    #[pyo3(signature = (b1, b2, kind="absorbing"))]
    fn new(b1: f64, b2: f64, kind: &str) -> PyResult<Self> {
        let inner = match kind {
            "absorbing" => model::Boundary::absorbing(b1, b2),
            "crossing" => model::Boundary::crossing(b1, b2),
            other => return Err(PyValueError::new_err(format!("unknown boundary kind `{other}`"))),
        };
        Ok(Boundary { inner })
    }

    #[getter]
    fn levels(&self) -> (f64, f64) {
        (self.inner.b1, self.inner.b2)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Lattice solution of the integral-equation system.
#[pyclass(frozen, module = "pyfpt2d")]
struct Solution {
    out: SolverOutput,
    model: model::Model,
    boundary: model::Boundary,
}

fn rows(f: &model::DensityField) -> Vec<Vec<f64>> {
    let (m, n) = f.shape();
    (0..m).map(|u| (0..n).map(|k| f.get(u, k)).collect()).collect()
}

#[pymethods]
impl Solution {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.out.grid.times()
    }

    #[getter]
    fn x1(&self) -> Vec<f64> {
        self.out.f1.axis1.clone()
    }

    #[getter]
    fn x2(&self) -> Vec<f64> {
        self.out.f2.axis1.clone()
    }

    /// `f1[u][k]`: density of `(X1, T2)` at slice knot `u` and time knot `k`.
    #[getter]
    fn f1(&self) -> Vec<Vec<f64>> {
        rows(&self.out.f1)
    }

    #[getter]
    fn f2(&self) -> Vec<Vec<f64>> {
        rows(&self.out.f2)
    }

    #[getter]
    fn total_mass(&self) -> f64 {
        self.out.diagnostics.total_mass
    }

    #[getter]
    fn negative_count(&self) -> usize {
        self.out.diagnostics.negative_count
    }

    #[getter]
    fn residual_sup(&self) -> Option<f64> {
        self.out.diagnostics.residual.as_ref().map(|r| r.sup)
    }

    /// Joint density of `(T1, T2)` on the positive time knots; `nan` on the diagonal.
    fn joint(&self) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let f = cli::assemble(&self.out, &self.model, &self.boundary, &QuadSpec::default()).py()?;
        Ok((f.axis1.clone(), rows(&f)))
    }
}

/// Closed-form joint density of `(T1, T2)` on the tensor grid `t1s x t2s`.
#[pyfunction]
fn joint_fpt(py: Python<'_>, model: &Model, boundary: &Boundary, t1s: Vec<f64>, t2s: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let p = *model.wiener_params()?;
    let b = boundary.inner;
    let flat = py
        .detach(|| joint_fpt_grid(&t1s, &t2s, &p, &b))
        .py()?;
    Ok(flat.chunks(t2s.len().max(1)).map(|c| c.to_vec()).collect())
}

fn joint_fpt_grid(t1s: &[f64], t2s: &[f64], p: &WienerParams, b: &model::Boundary) -> fpt2d::Result<Vec<f64>> {
    wiener::joint_fpt_grid(t1s, t2s, p, b, &QuadSpec::default(), &SeriesControl::default())
}

/// First-passage density of one component (1 or 2) at the times `ts`.
#[pyfunction]
fn fpt_density(model: &Model, boundary: &Boundary, i: u8, ts: Vec<f64>) -> PyResult<Vec<f64>> {
    let p = model.wiener_params()?;
    let c = component(i)?;
    ts.iter()
        .map(|&t| wiener::f_fpt_univ(c, t, p, &boundary.inner, None).py())
        .collect()
}

/// Transition density of the absorbed process at `(x1, x2)` after time `t`.
#[pyfunction]
fn absorbed_density(model: &Model, boundary: &Boundary, x1: f64, x2: f64, t: f64) -> PyResult<f64> {
    wiener::f_abs([x1, x2], t, model.wiener_params()?, &boundary.inner).py()
}

#[pyfunction]
#[pyo3(signature = (model, boundary, h, horizon, r, residuals=true))]
fn solve(py: Python<'_>, model: &Model, boundary: &Boundary, h: f64, horizon: f64, r: f64, residuals: bool) -> PyResult<Solution> {
    let m = model.inner;
    let b = boundary.inner;
    let grid = GridSpec::with_default_truncation(h, horizon, r, r, &m).py()?;
    let opts = solver::SolverOptions { residuals, ..Default::default() };
    let out = py.detach(|| solver::solve_with(&m, &b, &grid, &opts)).py()?;
    Ok(Solution { out, model: m, boundary: b })
}

/// Euler-Maruyama passage times as `(t1, t2, censored1, censored2)` tuples.
#[pyfunction]
#[pyo3(signature = (model, boundary, n_paths, step, horizon, seed=0, bridge_correction=true))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    model: &Model,
    boundary: &Boundary,
    n_paths: usize,
    step: f64,
    horizon: f64,
    seed: u64,
    bridge_correction: bool,
) -> PyResult<Vec<(f64, f64, bool, bool)>> {
    let cfg = SimConfig { bridge_correction, ..SimConfig::new(n_paths, step, horizon, seed).py()? };
    let m = model.inner;
    let b = boundary.inner;
    let s = py.detach(|| monte_carlo::simulate(&m, &b, &cfg)).py()?;
    Ok(s.iter().map(|x| (x.t1, x.t2, x.censored1, x.censored2)).collect())
}

/// Runs a CLI command on a TOML configuration and returns the output files
/// by name, without writing them.
#[pyfunction]
fn run(py: Python<'_>, command: &str, config: &str) -> PyResult<BTreeMap<String, String>> {
    let cmd = match command {
        "analytic" => cli::Command::Analytic,
        "solve" => cli::Command::Solve,
        "simulate" => cli::Command::Simulate,
        "converge" => cli::Command::Converge,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    let cfg = RunConfig::from_toml(config).py()?;
    let files = py.detach(|| cli::run(&cfg, cmd)).py()?;
    Ok(files.into_iter().map(|f| (f.name, f.contents)).collect())
}

#[pymodule]
fn pyfpt2d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Boundary>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(joint_fpt, m)?)?;
    m.add_function(wrap_pyfunction!(fpt_density, m)?)?;
    m.add_function(wrap_pyfunction!(absorbed_density, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
