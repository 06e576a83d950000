use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tomo::atomic::{regularization as reg, RegularizationInput};
use tomo::eval::{run_monte_carlo, McCell, McConfig, ScattererCount};
use tomo::linalg::CMatrix;
use tomo::method::{estimate as estimate_rs, EstimatorConfig, Method};
use tomo::signal::{self, Observation, Scene};
use tomo::TomoError;

fn to_py(e: TomoError) -> PyErr {
    match e {
        TomoError::Numerical(_) | TomoError::RankDeficient(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "ArrayGeometry", from_py_object)]
#[derive(Clone)]
struct PyGeometry(signal::ArrayGeometry);

#[pymethods]
impl PyGeometry {
    #[new]
    #[pyo3(signature = (wavelength_m, reference_range_m, n_full, element_spacing_m, observed=None))]
    fn new(
        wavelength_m: f64,
        reference_range_m: f64,
        n_full: usize,
        element_spacing_m: f64,
        observed: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let observed = observed.unwrap_or_else(|| (0..n_full).collect());
        signal::ArrayGeometry::new(wavelength_m, reference_range_m, n_full, element_spacing_m, observed)
            .map(Self)
            .map_err(to_py)
    }

    /// Ku-band 12-element simulation geometry.
    #[staticmethod]
    fn ku_band_simulation() -> Self {
        Self(signal::ArrayGeometry::ku_band_simulation())
    }

    fn with_observed(&self, observed: Vec<usize>) -> PyResult<Self> {
        self.0.with_observed(observed).map(Self).map_err(to_py)
    }

    fn with_random_subset(&self, m: usize, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.0.with_random_subset(m, &mut rng).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_full(&self) -> usize {
        self.0.n_full()
    }

    #[getter]
    fn observed_indices(&self) -> Vec<usize> {
        self.0.observed_indices().to_vec()
    }

    #[getter]
    fn rayleigh_resolution_m(&self) -> f64 {
        self.0.rayleigh_resolution_m()
    }

    #[getter]
    fn unambiguous_window_m(&self) -> f64 {
        self.0.unambiguous_window_m()
    }

    fn __repr__(&self) -> String {
        format!(
            "ArrayGeometry(n_full={}, observed={}, rho_s={:.4} m)",
            self.0.n_full(),
            self.0.n_observed(),
            self.0.rayleigh_resolution_m()
        )
    }
}

/// Returns `(tau, p)`.
#[pyfunction]
fn regularization(noise_variance: f64, n_full: usize, n_observed: usize, snapshots: usize) -> PyResult<(f64, f64)> {
    let r = reg(&RegularizationInput {
        noise_variance,
        n_full,
        n_observed,
        snapshots,
    })
    .map_err(to_py)?;
    Ok((r.tau, r.p))
}

/// Random-phase unit scatterers plus noise; rows are observed elements.
#[pyfunction]
#[pyo3(signature = (geometry, elevations_m, snapshots, noise_variance, seed, extent_m=40.0))]
fn simulate(
    geometry: &PyGeometry,
    elevations_m: Vec<f64>,
    snapshots: usize,
    noise_variance: f64,
    seed: u64,
    extent_m: f64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = Scene::random_phase(extent_m, snapshots, &elevations_m, 1.0, &mut rng).map_err(to_py)?;
    let obs = signal::simulate_observation_with(&geometry.0, &scene, noise_variance, &mut rng).map_err(to_py)?;
    let d = &obs.data;
    Ok((0..d.nrows()).map(|r| d.row(r).iter().copied().collect()).collect())
}

#[pyfunction]
#[pyo3(signature = (data, geometry, noise_variance, method="empast", tau=None))]
fn estimate<'py>(
    py: Python<'py>,
    data: Vec<Vec<Complex64>>,
    geometry: &PyGeometry,
    noise_variance: f64,
    method: &str,
    tau: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let rows = data.len();
    let cols = data.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || data.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("data must be a non-empty rectangular list of rows"));
    }
    let matrix = CMatrix::from_fn(rows, cols, |r, c| data[r][c]);
    let mut cfg = EstimatorConfig::new(method.parse::<Method>().map_err(to_py)?);
    cfg.tau = tau;
    cfg.tau_l1 = tau;
    let res = estimate_rs(&Observation::from_data(matrix, noise_variance), &geometry.0, &cfg).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("method", res.method.tag())?;
    out.set_item("elevations_m", res.elevations_m)?;
    out.set_item("powers", res.powers)?;
    out.set_item("tau", res.tau)?;
    out.set_item("iters_run", res.iters_run)?;
    out.set_item("converged", res.converged)?;
    Ok(out)
}

/// One Monte Carlo cell on the full geometry; returns the summary row.
#[pyfunction]
#[pyo3(signature = (method, snr_db, trials, seed, snapshots=8, alpha=None))]
fn monte_carlo<'py>(
    py: Python<'py>,
    method: &str,
    snr_db: f64,
    trials: usize,
    seed: u64,
    snapshots: usize,
    alpha: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let method = method.parse::<Method>().map_err(to_py)?;
    let cell = McCell {
        method,
        snr_db,
        alpha,
        snapshots,
        n_scatterers: if alpha.is_some() { ScattererCount::Two } else { ScattererCount::Random },
    };
    let geometry = signal::ArrayGeometry::ku_band_simulation();
    let report = run_monte_carlo(&[cell], &geometry, &McConfig::new(trials, seed)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("trials", trials)?;
    if let Some(row) = report.rows.first() {
        out.set_item("p_d", row.p_d)?;
        out.set_item("p_d_ci", row.p_d_ci)?;
        out.set_item("sigma_s", row.sigma_s)?;
        out.set_item("failures", row.failures)?;
    }
    Ok(out)
}

#[pymodule]
fn gridless_tomo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_function(wrap_pyfunction!(regularization, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
