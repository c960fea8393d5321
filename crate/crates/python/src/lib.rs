//! Python bindings for the moving-sample PINN library.
//!
//! Exposes the dense network with exact derivatives, the PDE benchmarks,
//! initial-set sampling, sample transport under a trained potential, the
//! verification suites, and full experiment runs driven by TOML configs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use msm_core::autodiff;
use msm_core::config::{ExperimentConfig, Preset};
use msm_core::error::Error;
use msm_core::flow;
use msm_core::pde;
use msm_core::sampling;
use msm_core::training;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::Toml(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Dense tanh network with exact input derivatives.
#[pyclass(name = "DenseNetwork")]
struct PyDenseNetwork {
    inner: autodiff::DenseNetwork,
}

#[pymethods]
impl PyDenseNetwork {
    #[new]
    fn new(layer_sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(PyDenseNetwork {
            inner: autodiff::init_network(&layer_sizes, seed).map_err(to_py_err)?,
        })
    }

    fn forward(&self, input: Vec<f64>) -> PyResult<f64> {
        self.inner.forward(&input).map_err(to_py_err)
    }

    /// Returns `(value, gradient, hessian)` with exact input derivatives.
    fn input_jet(&self, input: Vec<f64>) -> PyResult<(f64, Vec<f64>, Vec<Vec<f64>>)> {
        let jet = self.inner.input_jet(&input).map_err(to_py_err)?;
        let n = jet.dim();
        let hess = (0..n)
            .map(|i| (0..n).map(|j| jet.hess(i, j)).collect())
            .collect();
        Ok((jet.value, jet.grad.clone(), hess))
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params().0
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.inner
            .set_params(&autodiff::ParamVector(params))
            .map_err(to_py_err)
    }

    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layer_sizes().to_vec()
    }

    fn to_checkpoint_json(&self) -> PyResult<String> {
        self.inner.to_checkpoint_json().map_err(to_py_err)
    }

    #[staticmethod]
    fn from_checkpoint_json(json: &str) -> PyResult<Self> {
        Ok(PyDenseNetwork {
            inner: autodiff::DenseNetwork::from_checkpoint_json(json).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner
            .save_checkpoint(std::path::Path::new(path))
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyDenseNetwork {
            inner: autodiff::DenseNetwork::load_checkpoint(std::path::Path::new(path))
                .map_err(to_py_err)?,
        })
    }
}

/// One of the five PDE benchmarks.
#[pyclass(name = "PdeProblem")]
struct PyPdeProblem {
    inner: pde::PdeProblem,
}

#[pymethods]
impl PyPdeProblem {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyPdeProblem {
            inner: pde::PdeProblem::by_name(name).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn spatial_dim(&self) -> usize {
        self.inner.spatial_dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn domain(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.inner.domain().lo().to_vec(),
            self.inner.domain().hi().to_vec(),
        )
    }

    fn exact(&self, x: Vec<f64>, t: f64) -> Option<f64> {
        self.inner.exact(&x, t)
    }

    fn initial_value(&self, x: Vec<f64>) -> f64 {
        self.inner.initial_value(&x)
    }

    fn boundary_value(&self, x: Vec<f64>, t: f64) -> f64 {
        self.inner.boundary_value(&x, t)
    }

    /// Residual from derivative channels: value, full gradient (time last),
    /// spatial Laplacian.
    fn residual(&self, value: f64, grad: Vec<f64>, laplacian: f64, x: Vec<f64>, t: f64) -> f64 {
        self.inner.residual_channels(value, &grad, laplacian, &x, t)
    }

    /// Residual of the exact solution at a point (closed-form jets).
    fn exact_residual(&self, x: Vec<f64>, t: f64) -> Option<f64> {
        self.inner
            .exact_jet(&x, t)
            .map(|jet| self.inner.residual_jet(&jet, &x, t))
    }

    /// Value of a trained solution network, with the hard constraint applied
    /// when the problem uses one.
    fn solution_value(&self, net: &PyDenseNetwork, x: Vec<f64>, t: f64) -> f64 {
        training::solution_value(&self.inner, &net.inner, &x, t)
    }
}

/// Velocity potential: the induced field is its spatial gradient.
#[pyclass(name = "VelocityPotential")]
struct PyVelocityPotential {
    inner: flow::VelocityPotential,
}

#[pymethods]
impl PyVelocityPotential {
    #[new]
    fn new(net: &PyDenseNetwork) -> PyResult<Self> {
        Ok(PyVelocityPotential {
            inner: flow::VelocityPotential::new(net.inner.clone()).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let net = autodiff::DenseNetwork::load_checkpoint(std::path::Path::new(path))
            .map_err(to_py_err)?;
        Ok(PyVelocityPotential {
            inner: flow::VelocityPotential::new(net).map_err(to_py_err)?,
        })
    }

    fn velocity_at(&self, x: Vec<f64>, t: f64) -> Vec<f64> {
        self.inner.velocity_at(&x, t)
    }

    fn divergence_at(&self, x: Vec<f64>, t: f64) -> f64 {
        self.inner.divergence_at(&x, t)
    }

    /// RK4-advects `x0` across a uniform time grid inside the problem
    /// domain. Returns `(times, positions, logdet, alive)` where `positions`
    /// is indexed `[point][slice][dim]`.
    #[allow(clippy::type_complexity)]
    fn evolve(
        &self,
        problem: &PyPdeProblem,
        x0: Vec<Vec<f64>>,
        n_slices: usize,
        substeps: usize,
    ) -> PyResult<(Vec<f64>, Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>, Vec<Vec<bool>>)> {
        let grid = sampling::TimeGrid::uniform(problem.inner.horizon(), n_slices)
            .map_err(to_py_err)?;
        let traj = flow::evolve_samples(
            &self.inner,
            &x0,
            &grid,
            substeps,
            problem.inner.domain(),
            true,
        )
        .map_err(to_py_err)?;
        let positions = (0..traj.n_points())
            .map(|p| {
                (0..traj.n_slices())
                    .map(|k| traj.position(p, k).to_vec())
                    .collect()
            })
            .collect();
        let logdet = (0..traj.n_points())
            .map(|p| {
                (0..traj.n_slices())
                    .map(|k| traj.logdet_at(p, k).unwrap_or(0.0))
                    .collect()
            })
            .collect();
        let alive = (0..traj.n_points())
            .map(|p| (0..traj.n_slices()).map(|k| traj.is_alive(p, k)).collect())
            .collect();
        Ok((traj.times.clone(), positions, logdet, alive))
    }
}

/// Result summary of one training run.
#[pyclass(name = "RunSummary")]
struct PyRunSummary {
    #[pyo3(get)]
    problem: String,
    #[pyo3(get)]
    method: String,
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    rel_l2: f64,
    #[pyo3(get)]
    l_inf: f64,
    #[pyo3(get)]
    n_points_final: usize,
    /// Full per-iteration metrics as a JSON string.
    #[pyo3(get)]
    metrics_json: String,
    u_checkpoint: String,
    phi_checkpoint: Option<String>,
}

#[pymethods]
impl PyRunSummary {
    /// The trained solution network.
    fn u_network(&self) -> PyResult<PyDenseNetwork> {
        PyDenseNetwork::from_checkpoint_json(&self.u_checkpoint)
    }

    /// The trained velocity potential (absent for the PINN baseline).
    fn potential(&self) -> PyResult<Option<PyVelocityPotential>> {
        match &self.phi_checkpoint {
            None => Ok(None),
            Some(json) => {
                let net = PyDenseNetwork::from_checkpoint_json(json)?;
                Ok(Some(PyVelocityPotential::new(&net)?))
            }
        }
    }
}

#[pyfunction]
fn list_problems() -> Vec<&'static str> {
    pde::PROBLEM_NAMES.to_vec()
}

/// Default experiment configuration as TOML (`preset`: "full" or "desk").
#[pyfunction]
fn default_config_toml(problem: &str, preset: &str) -> PyResult<String> {
    let preset = Preset::parse(preset).map_err(to_py_err)?;
    ExperimentConfig::default_for(problem, preset)
        .and_then(|c| c.to_toml())
        .map_err(to_py_err)
}

/// Spatial samples drawn per an initial-condition strategy
/// ("uniform" | "prop_u0" | "prop_grad_u0_sq").
#[pyfunction]
fn sample_initial_positions(
    problem: &PyPdeProblem,
    strategy: &str,
    n: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let strategy = sampling::InitialStrategy::parse(strategy).map_err(to_py_err)?;
    sampling::sample_initial_positions(&problem.inner, strategy, n, seed).map_err(to_py_err)
}

/// Trains one experiment described by a TOML config; `method` and `seed`
/// override the config when given.
#[pyfunction]
#[pyo3(signature = (config_toml, method=None, seed=None))]
fn run_experiment(
    config_toml: &str,
    method: Option<&str>,
    seed: Option<u64>,
) -> PyResult<PyRunSummary> {
    let mut cfg = ExperimentConfig::from_toml(config_toml).map_err(to_py_err)?;
    if let Some(m) = method {
        cfg.method = m.to_string();
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(to_py_err)?;
    let problem = cfg.problem_instance().map_err(to_py_err)?;
    let tcfg = cfg.train_config().map_err(to_py_err)?;
    let scfg = cfg.sampling_config().map_err(to_py_err)?;
    let eval = cfg.eval_spec().map_err(to_py_err)?;
    let result = match cfg.method.as_str() {
        "msm" => training::msm_run(&problem, &tcfg, &scfg, cfg.seed, &eval),
        _ => training::pinn_run(&problem, &tcfg, &scfg, cfg.seed, &eval),
    }
    .map_err(to_py_err)?;
    Ok(PyRunSummary {
        problem: cfg.problem.clone(),
        method: cfg.method.clone(),
        seed: cfg.seed,
        rel_l2: result.metrics.rel_l2,
        l_inf: result.metrics.l_inf,
        n_points_final: result.metrics.n_points_final,
        metrics_json: serde_json::to_string(&result.metrics)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
        u_checkpoint: result.u_net.to_checkpoint_json().map_err(to_py_err)?,
        phi_checkpoint: match &result.potential {
            Some(p) => Some(p.net().to_checkpoint_json().map_err(to_py_err)?),
            None => None,
        },
    })
}

/// Runs a verification suite ("autodiff" | "flow" | "transport" | "losses");
/// returns `(passed, report_json)`.
#[pyfunction]
fn verify_suite(name: &str) -> PyResult<(bool, String)> {
    let suite = msm_core::verify::Suite::parse(name).map_err(to_py_err)?;
    let report = msm_core::verify::run_suite(suite);
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((report.passed, json))
}

#[pymodule]
fn msm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDenseNetwork>()?;
    m.add_class::<PyPdeProblem>()?;
    m.add_class::<PyVelocityPotential>()?;
    m.add_class::<PyRunSummary>()?;
    m.add_function(wrap_pyfunction!(list_problems, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(sample_initial_positions, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
