//! End-to-end elevation estimation for one pixel: EMPAST, PAST or the GBCS baseline.

use std::fmt;
use std::str::FromStr;

use crate::admm::{solve_empast, solve_past, SolverConfig};
use crate::atomic::{regularization_tau, RegularizationInput};
use crate::error::{Result, TomoError};
use crate::gbcs::{build_dictionary, default_grid_step, default_tau_l1, extract_peaks, solve_l1_snapshots, L1Config};
use crate::linalg::CMatrix;
use crate::signal::{ArrayGeometry, Observation};
use crate::spectrum::{estimate_amplitudes, estimate_model_order_with, vandermonde_decompose, DEFAULT_REL_THRESH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Empast,
    Past,
    Gbcs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Empast, Method::Past, Method::Gbcs];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Empast => "empast",
            Method::Past => "past",
            Method::Gbcs => "gbcs",
        }
    }

    /// PAST is single-snapshot by construction.
    pub fn snapshots(self, requested: usize) -> usize {
        match self {
            Method::Past => 1,
            _ => requested,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = TomoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "empast" => Ok(Method::Empast),
            "past" => Ok(Method::Past),
            "gbcs" => Ok(Method::Gbcs),
            other => Err(TomoError::Config(format!(
                "unknown method '{other}'; valid tags are empast, past, gbcs"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Overrides the regularization formula when set.
    pub tau: Option<f64>,
    pub penalty_eta: f64,
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_change: f64,
    pub adaptive_penalty: bool,
    pub rel_thresh: f64,
    /// Absolute eigenvalue floor for order selection, as a multiple of τ.
    pub noise_floor_tau_factor: f64,
    /// Elevation extent searched by GBCS.
    pub extent_m: f64,
    pub grid_step_m: Option<f64>,
    pub tau_l1: Option<f64>,
    pub l1_max_iters: usize,
    pub l1_tol: f64,
    pub max_peaks: usize,
    /// Minimum spacing between GBCS peaks in grid steps.
    pub min_peak_separation_cells: usize,
}

impl EstimatorConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            tau: None,
            penalty_eta: 1.0,
            max_iters: 5000,
            tol_primal: 1e-6,
            tol_change: 1e-8,
            adaptive_penalty: false,
            rel_thresh: DEFAULT_REL_THRESH,
            noise_floor_tau_factor: 0.0,
            extent_m: 40.0,
            grid_step_m: None,
            tau_l1: None,
            l1_max_iters: 2000,
            l1_tol: 1e-8,
            max_peaks: 8,
            min_peak_separation_cells: 2,
        }
    }

    pub fn solver_config(&self, tau: f64) -> SolverConfig {
        SolverConfig {
            tau,
            penalty_eta: self.penalty_eta,
            max_iters: self.max_iters,
            tol_primal: self.tol_primal,
            tol_change: self.tol_change,
            adaptive_penalty: self.adaptive_penalty,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub method: Method,
    /// Ascending.
    pub elevations_m: Vec<f64>,
    pub powers: Vec<f64>,
    /// Least-squares reflectivities `K̂ × L`, absent when the refit is ill-posed.
    pub amplitudes: Option<CMatrix>,
    pub tau: f64,
    pub iters_run: usize,
    pub converged: bool,
    pub rank_deficient: bool,
}

impl EstimationResult {
    pub fn model_order(&self) -> usize {
        self.elevations_m.len()
    }

    fn empty(method: Method, tau: f64) -> Self {
        Self {
            method,
            elevations_m: Vec::new(),
            powers: Vec::new(),
            amplitudes: None,
            tau,
            iters_run: 0,
            converged: true,
            rank_deficient: false,
        }
    }
}

pub fn estimate(observation: &Observation, geometry: &ArrayGeometry, config: &EstimatorConfig) -> Result<EstimationResult> {
    observation.check_against(geometry)?;
    match config.method {
        Method::Empast | Method::Past => estimate_gridless(observation, geometry, config),
        Method::Gbcs => estimate_grid(observation, geometry, config),
    }
}

fn estimate_gridless(observation: &Observation, geometry: &ArrayGeometry, config: &EstimatorConfig) -> Result<EstimationResult> {
    let tau = match config.tau {
        Some(t) => t,
        None => regularization_tau(&RegularizationInput::for_geometry(
            geometry,
            observation.noise_variance,
            observation.snapshots(),
        ))?,
    };
    let solver = config.solver_config(tau);
    let state = match config.method {
        Method::Past => solve_past(observation, geometry, &solver)?,
        _ => solve_empast(observation, geometry, &solver)?,
    };
    let floor = config.noise_floor_tau_factor * tau;
    let order = estimate_model_order_with(&state.u, floor, config.rel_thresh)?;
    let mut result = EstimationResult::empty(config.method, tau);
    result.iters_run = state.iters_run;
    result.converged = state.converged;
    if order == 0 {
        return Ok(result);
    }
    let spectral = vandermonde_decompose(&state.u, order)?;
    let mut pairs: Vec<(f64, f64)> = spectral
        .elevations_m(geometry)
        .into_iter()
        .zip(spectral.powers.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    result.elevations_m = pairs.iter().map(|p| p.0).collect();
    result.powers = pairs.iter().map(|p| p.1).collect();
    result.rank_deficient = spectral.rank_deficient;
    if !result.elevations_m.is_empty() {
        result.amplitudes = estimate_amplitudes(observation, geometry, &result.elevations_m).ok();
    }
    Ok(result)
}

fn estimate_grid(observation: &Observation, geometry: &ArrayGeometry, config: &EstimatorConfig) -> Result<EstimationResult> {
    let step = config.grid_step_m.unwrap_or_else(|| default_grid_step(geometry));
    let dictionary = build_dictionary(geometry, config.extent_m, step)?;
    let tau = config
        .tau_l1
        .unwrap_or_else(|| default_tau_l1(observation.noise_variance, &dictionary));
    let l1 = L1Config {
        tau,
        max_iters: config.l1_max_iters,
        tol: config.l1_tol,
    };
    let (profile, converged) = solve_l1_snapshots(observation, geometry, &dictionary, &l1)?;
    let peaks = extract_peaks(
        &profile,
        &dictionary,
        config.max_peaks,
        config.min_peak_separation_cells as f64 * step - 1e-9,
    );
    let mut result = EstimationResult::empty(Method::Gbcs, tau);
    result.converged = converged;
    result.elevations_m = peaks.iter().map(|p| p.elevation_m).collect();
    result.powers = peaks.iter().map(|p| p.amplitude.norm_sqr()).collect();
    if !result.elevations_m.is_empty() {
        result.amplitudes = estimate_amplitudes(observation, geometry, &result.elevations_m).ok();
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{simulate_observation, snr_to_variance, Scene};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        let err = "music".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("empast") && err.contains("gbcs"));
    }

    #[test]
    fn noiseless_single_scatterer_all_methods() {
        let g = ArrayGeometry::ku_band_simulation();
        let rho = g.rayleigh_resolution_m();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for method in Method::ALL {
            let l = method.snapshots(4);
            let scene = Scene::random_phase(40.0, l, &[5.0 * rho / 8.0], 1.0, &mut rng).unwrap();
            let obs = simulate_observation(&g, &scene, 0.0, 0).unwrap();
            let mut cfg = EstimatorConfig::new(method);
            cfg.tau = Some(1e-3);
            cfg.tau_l1 = Some(1e-3);
            let r = estimate(&obs, &g, &cfg).unwrap();
            assert!(!r.elevations_m.is_empty(), "{method}");
            let best = r
                .elevations_m
                .iter()
                .map(|s| (s - 5.0 * rho / 8.0).abs())
                .fold(f64::INFINITY, f64::min);
            // GBCS is limited to half a grid cell.
            let tol = if method == Method::Gbcs { rho / 16.0 + 1e-9 } else { 0.05 * rho };
            assert!(best < tol, "{method}: {best}");
        }
    }

    #[test]
    fn zero_observation_is_empty() {
        let g = ArrayGeometry::ku_band_simulation();
        let obs = Observation::from_data(CMatrix::zeros(12, 2), 1.0);
        for method in [Method::Empast, Method::Gbcs] {
            let r = estimate(&obs, &g, &EstimatorConfig::new(method)).unwrap();
            assert_eq!(r.model_order(), 0);
        }
    }

    #[test]
    fn noisy_two_scatterers_resolved() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let full = ArrayGeometry::ku_band_simulation();
        let g = full.with_random_subset(8, &mut rng).unwrap();
        let scene = Scene::random_phase(40.0, 8, &[-7.0, 6.0], 1.0, &mut rng).unwrap();
        let sigma = snr_to_variance(&scene, &g, 10.0).unwrap();
        let obs = simulate_observation(&g, &scene, sigma, 4).unwrap();
        let r = estimate(&obs, &g, &EstimatorConfig::new(Method::Empast)).unwrap();
        for truth in [-7.0, 6.0] {
            let err = r.elevations_m.iter().map(|s| (s - truth).abs()).fold(f64::INFINITY, f64::min);
            assert!(err < 0.5, "{:?}", r.elevations_m);
        }
    }
}
