//! Python bindings: model parameters, disorder paths, spectral
//! classification, Lyapunov estimation, Green's function scans and box
//! eigendecompositions.

use diracloc::disorder::{sample_path, DistributionFamily, DistributionSpec};
use diracloc::eigen::diagonalize;
use diracloc::error::Error;
use diracloc::greens::fractional_moment_scan;
use diracloc::lyapunov::{beta_closed_form, estimate_beta};
use diracloc::model::{
    assemble_operator, energy_context, BoxDescriptor, Exponent, ModelParams, Spin,
};
use diracloc::phase::{classify, critical_energies, lambda_critical};
use diracloc::prufer::martingale_diagnostics;
use diracloc::transfer::{transfer_from_potential, System};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::EnergyOutOfBand { .. }
        | Error::NearBandEdge { .. }
        | Error::ExcludedK { .. }
        | Error::SubcriticalOnly { .. }
        | Error::SiteOutOfRange { .. }
        | Error::PathTooShort { .. }
        | Error::UnsupportedInitialState(_)
        | Error::DimensionCap { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<DistributionSpec> {
    Ok(DistributionSpec::new(
        name.parse::<DistributionFamily>().map_err(to_py)?,
    ))
}

/// Mass, coupling and decay exponent of the random Dirac operator.
#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    /// `alpha` may be a float or a ratio string such as `"1/2"`.
    #[new]
    #[pyo3(signature = (m, lam, alpha))]
    fn new(m: f64, lam: f64, alpha: &Bound<'_, PyAny>) -> PyResult<Self> {
        let exponent = if let Ok(text) = alpha.extract::<String>() {
            text.parse::<Exponent>().map_err(to_py)?
        } else {
            Exponent::value(alpha.extract::<f64>()?).map_err(to_py)?
        };
        Ok(PyModelParams {
            inner: ModelParams::new(m, lam, exponent).map_err(to_py)?,
        })
    }

    #[getter]
    fn m(&self) -> f64 {
        self.inner.m
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha.as_f64()
    }

    /// `"subcritical"`, `"critical"` or `"supercritical"`.
    fn alpha_class(&self) -> &'static str {
        self.inner.alpha_class().as_str()
    }

    /// Spectral type at energy `E`: `"pp"`, `"sc"`, `"ac"` or `"outside_band"`.
    fn classify(&self, energy: f64) -> &'static str {
        classify(&self.inner, energy).spectral_type.as_str()
    }

    /// Potentials `(V_1(1..=n), V_2(1..=n))` of one disorder realization.
    #[pyo3(signature = (n, seed, distribution = "gaussian"))]
    fn sample_path(
        &self,
        n: usize,
        seed: u64,
        distribution: &str,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let path = sample_path(&self.inner, &family(distribution)?, n, seed);
        Ok((path.v1_slice().to_vec(), path.v2_slice().to_vec()))
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(m={}, lam={}, alpha={})",
            self.inner.m, self.inner.lambda, self.inner.alpha
        )
    }
}

/// Closed-form Lyapunov exponent at energy `E`.
#[pyfunction]
fn beta(energy: f64, m: f64, lam: f64) -> PyResult<f64> {
    beta_closed_form(&energy_context(energy, m).map_err(to_py)?, lam).map_err(to_py)
}

/// `(λ*(m), E*(m))` for `m > 0`.
#[pyfunction]
fn critical_coupling(m: f64) -> PyResult<(f64, f64)> {
    let c = lambda_critical(m).map_err(to_py)?;
    Ok((c.lambda_star, c.energy_star))
}

/// `(E*₋, E*₊)`, or `None` above the critical coupling.
#[pyfunction]
#[pyo3(name = "critical_energies")]
fn py_critical_energies(lam: f64, m: f64) -> Option<(f64, f64)> {
    critical_energies(lam, m)
}

/// Single-step transfer matrix as nested lists.
#[pyfunction]
#[pyo3(signature = (energy, m, v1, v2, second_system = false))]
fn transfer_matrix(energy: f64, m: f64, v1: f64, v2: f64, second_system: bool) -> [[f64; 2]; 2] {
    let system = if second_system {
        System::Second
    } else {
        System::First
    };
    let t = transfer_from_potential(energy, m, v1, v2, system);
    [[t.a, t.b], [t.c, t.d]]
}

/// Monte Carlo Lyapunov exponent.
#[pyfunction]
#[pyo3(signature = (params, energy, n, replicas, seed, distribution = "gaussian"))]
fn lyapunov<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    energy: f64,
    n: usize,
    replicas: usize,
    seed: u64,
    distribution: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let ctx = energy_context(energy, params.inner.m).map_err(to_py)?;
    let spec = family(distribution)?;
    let est = py
        .detach(|| estimate_beta(&ctx, &params.inner, &spec, n, replicas, seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("beta_hat", est.beta_hat)?;
    d.set_item("stderr", est.stderr)?;
    d.set_item("beta_hat_prufer", est.beta_hat_prufer)?;
    d.set_item("stderr_prufer", est.stderr_prufer)?;
    d.set_item("closed_form", est.closed_form)?;
    d.set_item("s_n", est.s_n)?;
    Ok(d)
}

/// Eigenvalues and eigenvectors of the operator restricted to `Λ_L`
/// (or `Λ'_L` when `prime` is set).
#[pyfunction]
#[pyo3(signature = (params, l, seed, prime = false, distribution = "gaussian"))]
fn eigensystem(
    py: Python<'_>,
    params: &PyModelParams,
    l: usize,
    seed: u64,
    prime: bool,
    distribution: &str,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let spec = family(distribution)?;
    let boxd = if prime {
        BoxDescriptor::lambda_prime(l)
    } else {
        BoxDescriptor::lambda(l)
    };
    let path = sample_path(&params.inner, &spec, l + 1, seed);
    let op = assemble_operator(&params.inner, &path, boxd).map_err(to_py)?;
    let d = py.detach(|| diagonalize(&op)).map_err(to_py)?;
    Ok((d.eigenvalues, d.eigenvectors))
}

/// Fractional moments `E|G_L(u,−;n,−)|^s` on a site grid with the decay fit.
#[pyfunction]
#[pyo3(signature = (params, energy, grid, l, replicas, seed, s = 0.1, u = 1, distribution = "gaussian"))]
#[allow(clippy::too_many_arguments)]
fn green_decay<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    energy: f64,
    grid: Vec<usize>,
    l: usize,
    replicas: usize,
    seed: u64,
    s: f64,
    u: usize,
    distribution: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = family(distribution)?;
    let est = py
        .detach(|| {
            fractional_moment_scan(
                &params.inner,
                &spec,
                energy,
                u,
                Spin::Minus,
                s,
                &grid,
                l,
                replicas,
                seed,
            )
        })
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n", est.points.iter().map(|p| p.n).collect::<Vec<_>>())?;
    d.set_item(
        "mean",
        est.points.iter().map(|p| p.mean).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "stderr",
        est.points.iter().map(|p| p.stderr).collect::<Vec<_>>(),
    )?;
    d.set_item("slope", est.fit.slope)?;
    d.set_item("slope_ci", (est.fit.slope_lo, est.fit.slope_hi))?;
    d.set_item("r2", est.fit.r2)?;
    d.set_item("resamples", est.resamples)?;
    Ok(d)
}

/// Martingale decomposition of `log R_N²` along one path.
#[pyfunction]
#[pyo3(signature = (params, energy, n, seed, theta0 = 0.0, distribution = "gaussian"))]
fn martingales<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    energy: f64,
    n: usize,
    seed: u64,
    theta0: f64,
    distribution: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let ctx = energy_context(energy, params.inner.m).map_err(to_py)?;
    let path = sample_path(&params.inner, &family(distribution)?, n + 1, seed);
    let r = py
        .detach(|| martingale_diagnostics(&ctx, &path, n, theta0))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("s_n", r.s_n)?;
    d.set_item("log_r2", r.log_r2)?;
    d.set_item("drift", r.drift)?;
    d.set_item("martingales", r.martingales.to_vec())?;
    d.set_item("phase_sums", r.phase_sums.to_vec())?;
    d.set_item("remainder", r.remainder)?;
    d.set_item("residual", r.residual)?;
    Ok(d)
}

#[pymodule(name = "diracloc")]
fn diracloc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(critical_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(py_critical_energies, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(eigensystem, m)?)?;
    m.add_function(wrap_pyfunction!(green_decay, m)?)?;
    m.add_function(wrap_pyfunction!(martingales, m)?)?;
    Ok(())
}
