//! Python bindings: prior families, the quadrature oracle, the samplers and
//! model fitting.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use countshrink::distributions::{self as dist, GigParams};
use countshrink::mcmc::{self, PosteriorDraws};
use countshrink::model::{CountDataset, ModelSpec};
use countshrink::oracle;
use countshrink::priors::{self, GlobalParams, PriorKind};
use countshrink::rng::stream;
use countshrink::simstudy::{self, ScenarioId};

fn to_py(e: countshrink::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Local prior family: "IG", "EH" or "PG".
#[pyclass(frozen, from_py_object, module = "countshrink")]
#[derive(Clone, Copy)]
pub struct PriorFamily {
    inner: priors::PriorFamily,
}

#[pymethods]
impl PriorFamily {
    #[new]
    #[pyo3(signature = (kind, gamma = 1.0, finite_mean = false))]
    fn new(kind: &str, gamma: f64, finite_mean: bool) -> PyResult<Self> {
        let kind: PriorKind = kind.parse().map_err(to_py)?;
        let inner = match kind {
            PriorKind::PoissonGamma => priors::PriorFamily::poisson_gamma(),
            k => priors::PriorFamily::new(k, gamma).map_err(to_py)?.with_finite_mean(finite_mean),
        };
        Ok(PriorFamily { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.label()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    /// Log density of the local prior at u.
    fn log_density_u(&self, u: f64) -> PyResult<f64> {
        priors::log_density_u(&self.inner, u).map_err(to_py)
    }

    fn tail_index(&self) -> PyResult<f64> {
        priors::tail_index(&self.inner).map_err(to_py)
    }

    /// Marginal prior density of λ at each point of `lambdas`.
    #[pyo3(signature = (lambdas, alpha = 1.0, beta = 1.0))]
    fn prior_density(&self, lambdas: Vec<f64>, alpha: f64, beta: f64) -> PyResult<Vec<f64>> {
        let g = GlobalParams::new(alpha, beta).map_err(to_py)?;
        lambdas
            .iter()
            .map(|&l| priors::marginal_prior_lambda(&self.inner, &g, l))
            .collect::<countshrink::Result<_>>()
            .map_err(to_py)
    }

    /// Marginal posterior density of λ given one count.
    #[pyo3(signature = (lambdas, y, eta = 1.0, alpha = 1.0, beta = 1.0))]
    fn posterior_density(&self, lambdas: Vec<f64>, y: u64, eta: f64, alpha: f64, beta: f64) -> PyResult<Vec<f64>> {
        let g = GlobalParams::new(alpha, beta).map_err(to_py)?;
        priors::marginal_posterior_lambda(&self.inner, &g, y, eta, &lambdas).map_err(to_py)
    }

    /// Posterior mean E[λ | y] at fixed hyperparameters.
    #[pyo3(signature = (y, eta = 1.0, alpha = 1.0, beta = 1.0))]
    fn posterior_mean(&self, y: u64, eta: f64, alpha: f64, beta: f64) -> PyResult<f64> {
        let g = GlobalParams::new(alpha, beta).map_err(to_py)?;
        oracle::posterior_mean_quadrature(&self.inner, &g, y, eta).map_err(to_py)
    }

    /// λ̃(y) − y for each count (η = 1).
    #[pyo3(signature = (ys, alpha = 1.0, beta = 1.0))]
    fn bias_curve(&self, ys: Vec<u64>, alpha: f64, beta: f64) -> PyResult<Vec<f64>> {
        let g = GlobalParams::new(alpha, beta).map_err(to_py)?;
        Ok(oracle::bias_curve(&self.inner, &g, &ys).map_err(to_py)?.bias)
    }

    fn __repr__(&self) -> String {
        match self.inner.kind {
            PriorKind::PoissonGamma => "PriorFamily('PG')".into(),
            k => format!("PriorFamily('{}', gamma={})", k.label(), self.inner.gamma),
        }
    }
}

/// Stored posterior draws from `fit`.
#[pyclass(frozen, module = "countshrink")]
pub struct Fit {
    draws: PosteriorDraws,
}

#[pymethods]
impl Fit {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.draws.names().to_vec()
    }

    #[getter]
    fn n_draws(&self) -> usize {
        self.draws.n_draws()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        self.draws
            .column(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyValueError::new_err(format!("no parameter `{name}`")))
    }

    /// Posterior means of λ in unit order.
    fn lambda_means(&self) -> Vec<f64> {
        (0..self.draws.n_units)
            .map(|i| {
                let c = self.draws.lambda(i);
                c.iter().sum::<f64>() / c.len() as f64
            })
            .collect()
    }

    /// One dict per parameter: mean, sd, q025, q975, inefficiency_factor.
    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let s = self.draws.summary().map_err(to_py)?;
        s.params
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("name", &p.name)?;
                d.set_item("mean", p.mean)?;
                d.set_item("sd", p.sd)?;
                d.set_item("q025", p.q025)?;
                d.set_item("q975", p.q975)?;
                d.set_item("inefficiency_factor", p.inefficiency_factor)?;
                Ok(d)
            })
            .collect()
    }

    #[getter]
    fn gamma_acceptance_rate(&self) -> Option<f64> {
        self.draws.diagnostics.gamma_acceptance_rate()
    }
}

/// Runs the Gibbs sampler. `covariates` (rows per unit) switches on the
/// log-linear offset model.
#[pyfunction]
#[pyo3(signature = (counts, offsets = None, covariates = None, family = None, draws = 3000, burn_in = 500, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    counts: Vec<u64>,
    offsets: Option<Vec<f64>>,
    covariates: Option<Vec<Vec<f64>>>,
    family: Option<PriorFamily>,
    draws: usize,
    burn_in: usize,
    seed: u64,
) -> PyResult<Fit> {
    let m = counts.len();
    let x = match covariates {
        None => None,
        Some(rows) => {
            let p = rows.first().map_or(0, Vec::len);
            if rows.len() != m || rows.iter().any(|r| r.len() != p) {
                return Err(PyValueError::new_err("covariates must be an m x p table"));
            }
            Some(nalgebra::DMatrix::from_row_iterator(m, p, rows.into_iter().flatten()))
        }
    };
    let regression = x.is_some();
    let ids = (1..=m).map(|i| i.to_string()).collect();
    let data = CountDataset::new(ids, counts, offsets.unwrap_or_else(|| vec![1.0; m]), x).map_err(to_py)?;
    let family = family.map_or_else(|| priors::PriorFamily::extremely_heavy(1.0).expect("valid"), |f| f.inner);
    let base = if regression {
        ModelSpec::regression(family)
    } else {
        ModelSpec::new(family)
    };
    let spec = base.with_lengths(draws, burn_in).with_seed(seed);
    let draws = py.detach(|| mcmc::run_chain(&data, &spec)).map_err(to_py)?;
    Ok(Fit { draws })
}

#[pyfunction]
#[pyo3(signature = (order, linear_rate, inverse_rate, n, seed = 1))]
fn sample_gig(order: f64, linear_rate: f64, inverse_rate: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    let p = GigParams::new(order, linear_rate, inverse_rate).map_err(to_py)?;
    let mut rng = stream(seed);
    Ok((0..n).map(|_| dist::sample_gig(&p, &mut rng)).collect())
}

#[pyfunction]
#[pyo3(signature = (count, shape, n, seed = 1))]
fn sample_crt(count: u64, shape: f64, n: usize, seed: u64) -> PyResult<Vec<u64>> {
    let mut rng = stream(seed);
    (0..n)
        .map(|_| dist::sample_crt(count, shape, &mut rng).map(|d| d.tables))
        .collect::<countshrink::Result<_>>()
        .map_err(to_py)
}

/// Exact table-count pmf over ν = 0..=count.
#[pyfunction]
fn crt_pmf(count: u64, shape: f64) -> PyResult<Vec<f64>> {
    dist::crt_exact_pmf(count, shape).map_err(to_py)
}

/// Simulated data for one scenario: dict with counts, offsets, lambda, outlier.
#[pyfunction]
#[pyo3(signature = (scenario, omega, m, seed = 1))]
fn generate_scenario<'py>(py: Python<'py>, scenario: &str, omega: f64, m: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let id: ScenarioId = scenario.parse().map_err(to_py)?;
    let d = simstudy::generate_scenario(id, omega, m, &mut stream(seed)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("counts", d.data.counts)?;
    out.set_item("offsets", d.data.offsets)?;
    out.set_item("lambda", d.lambda)?;
    out.set_item("outlier", d.outlier)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "countshrink")]
fn countshrink_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PriorFamily>()?;
    m.add_class::<Fit>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gig, m)?)?;
    m.add_function(wrap_pyfunction!(sample_crt, m)?)?;
    m.add_function(wrap_pyfunction!(crt_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
