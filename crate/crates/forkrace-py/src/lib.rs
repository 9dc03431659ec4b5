//! Python bindings.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ::forkrace as fr;
use fr::analytic::Model;
use fr::mdp::{bsm_action, honest_action, MdpModel};
use fr::pomdp::{Budget, PomdpOptions};

fn err(e: fr::Error) -> PyErr {
    match e {
        fr::Error::NonConvergence { .. } | fr::Error::NoCrossing { .. } | fr::Error::BudgetExceeded { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "MinerConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: fr::MinerConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (alpha, alpha_h=None, gamma=None, theta=None, n_max=2))]
    fn new(
        alpha: Vec<f64>,
        alpha_h: Option<f64>,
        gamma: Option<Vec<f64>>,
        theta: Option<Vec<f64>>,
        n_max: usize,
    ) -> PyResult<Self> {
        let file = fr::config::ConfigFile {
            alpha: Some(alpha),
            alpha_h,
            gamma,
            theta,
            n_max: Some(n_max),
        };
        Ok(PyConfig {
            inner: file.build().map_err(err)?,
        })
    }

    #[staticmethod]
    fn symmetric(m: usize, alpha: f64, n_max: usize) -> PyResult<Self> {
        Ok(PyConfig {
            inner: fr::MinerConfig::symmetric(m, alpha, n_max).map_err(err)?,
        })
    }

    #[getter]
    fn alpha(&self) -> Vec<f64> {
        self.inner.alpha.clone()
    }

    #[getter]
    fn alpha_h(&self) -> f64 {
        self.inner.alpha_h
    }

    #[getter]
    fn gamma(&self) -> Vec<f64> {
        self.inner.gamma.clone()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.inner.n_max
    }

    fn __repr__(&self) -> String {
        format!(
            "MinerConfig(alpha={:?}, alpha_h={}, gamma={:?}, theta={:?}, n_max={})",
            self.inner.alpha, self.inner.alpha_h, self.inner.gamma, self.inner.theta, self.inner.n_max
        )
    }
}

#[pyclass(name = "RevenueReport", from_py_object)]
#[derive(Clone)]
struct PyReport {
    inner: fr::RevenueReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn r(&self) -> Vec<f64> {
        self.inner.r.clone()
    }

    #[getter]
    fn r_hat(&self) -> Vec<f64> {
        self.inner.r_hat.clone()
    }

    #[getter]
    fn orphans_h(&self) -> f64 {
        self.inner.orphans_h
    }

    #[getter]
    fn r_vld(&self) -> f64 {
        self.inner.r_vld
    }

    #[getter]
    fn r_tot(&self) -> f64 {
        self.inner.r_tot
    }

    #[getter]
    fn round_len(&self) -> f64 {
        self.inner.round_len
    }

    fn orphan_ratio_h(&self) -> f64 {
        self.inner.orphan_ratio_h()
    }

    fn __repr__(&self) -> String {
        format!("RevenueReport(r_hat={:?})", self.inner.r_hat)
    }
}

/// Stationary revenues; `model` is n2, n4, m, engine or single.
#[pyfunction]
#[pyo3(signature = (config, model=None))]
fn revenue(config: &PyConfig, model: Option<&str>) -> PyResult<PyReport> {
    let model = match model {
        Some(s) => s.parse::<Model>().map_err(err)?,
        None => fr::analytic::default_model(&config.inner),
    };
    Ok(PyReport {
        inner: fr::analytic::revenue(model, &config.inner).map_err(err)?,
    })
}

/// Symmetric threshold with γ and θ taken from `template`.
#[pyfunction]
fn threshold(model: &str, template: &PyConfig) -> PyResult<f64> {
    let model = model.parse::<Model>().map_err(err)?;
    Ok(fr::analytic::find_threshold_symmetric(model, &template.inner)
        .map_err(err)?
        .threshold)
}

#[pyfunction]
#[pyo3(signature = (config, rounds=1_000_000, seed=0))]
fn simulate<'py>(py: Python<'py>, config: &PyConfig, rounds: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let s = py
        .detach(|| fr::sim::run_bsm(&config.inner, rounds, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("r_hat", s.r_hat)?;
    d.set_item("se", s.se)?;
    d.set_item("orphan_ratio", s.orphan_ratio)?;
    d.set_item("rounds", s.rounds)?;
    d.set_item("r_vld", s.r_vld)?;
    d.set_item("r_tot", s.r_tot)?;
    Ok(d)
}

/// Optimal relative revenue of attacker 1 against a BSM attacker 2.
#[pyfunction]
#[pyo3(signature = (config, h3_max=None, p=1.0, epsilon=1e-6))]
fn mdp_optimum<'py>(
    py: Python<'py>,
    config: &PyConfig,
    h3_max: Option<usize>,
    p: f64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let (rho, bsm, honest, states) = py
        .detach(|| -> fr::Result<_> {
            let h3 = h3_max.unwrap_or(cfg.n_max + 1);
            let model = MdpModel::build_with(&cfg, h3, p, fr::mdp::DEFAULT_LIMIT)?;
            let opt = fr::mdp::solve_opt(&model, epsilon)?;
            let share = |g: [f64; 3]| g[0] / (g[0] + g[1] + g[2]);
            let bsm = share(fr::mdp::evaluate(&model, |s| bsm_action(s, cfg.n_max))?.0);
            let honest = share(fr::mdp::evaluate(&model, honest_action)?.0);
            Ok((opt.rho, bsm, honest, model.len()))
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("rho", rho)?;
    d.set_item("bsm", bsm)?;
    d.set_item("honest", honest)?;
    d.set_item("states", states)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config, p=0.9, xi=100_000, epsilon=1e-5, seed=0, expansions=2000))]
fn pomdp_solve<'py>(
    py: Python<'py>,
    config: &PyConfig,
    p: f64,
    xi: u64,
    epsilon: f64,
    seed: u64,
    expansions: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = PomdpOptions {
        p,
        xi,
        epsilon,
        seed,
        budget: Budget::expansions(expansions),
        ..Default::default()
    };
    let cfg = config.inner.clone();
    let r = py.detach(|| fr::pomdp::solve_pomdp(&cfg, &opts)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("rho", r.rho)?;
    d.set_item("revenue", r.revenue)?;
    d.set_item("se", r.se)?;
    d.set_item("mdp_rho", r.mdp_rho)?;
    d.set_item("honest", r.honest)?;
    d.set_item("bsm", r.bsm)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("cache_hits", r.cache_hits)?;
    Ok(d)
}

#[pyfunction]
fn absolute_revenue(report: &PyReport, k: u64) -> PyResult<Vec<f64>> {
    fr::daa::absolute_revenue(&report.inner, k).map_err(err)
}

/// Periods until attacker `i` beats its hash power, or None.
#[pyfunction]
fn profitable_delay(report: &PyReport, i: usize, alpha: f64) -> Option<u64> {
    match fr::daa::profitable_delay(&report.inner, i, alpha) {
        fr::daa::Delay::Periods(k) => Some(k),
        fr::daa::Delay::Never => None,
    }
}

#[pymodule]
fn forkrace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(revenue, m)?)?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(mdp_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(pomdp_solve, m)?)?;
    m.add_function(wrap_pyfunction!(absolute_revenue, m)?)?;
    m.add_function(wrap_pyfunction!(profitable_delay, m)?)?;
    Ok(())
}
