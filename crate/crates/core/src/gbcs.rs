//! Grid-based compressed sensing baseline.
//!
//! A uniform elevation grid defines the dictionary `A_Q`; the reflectivity profile
//! solves `min ½‖g − A_Q·γ‖² + τ‖γ‖₁` with FISTA.

use crate::error::{Result, TomoError};
use crate::linalg::{c, CMatrix, CVector};
use crate::signal::{steering_vector, ArrayGeometry, Observation};
use num_complex::Complex64;

/// Default fraction of the peak magnitude below which grid cells are ignored.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub grid_elevations: Vec<f64>,
    /// Restricted steering vectors, `M × Q`.
    pub matrix: CMatrix,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.grid_elevations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_elevations.is_empty()
    }

    pub fn step_m(&self) -> f64 {
        self.grid_elevations[1] - self.grid_elevations[0]
    }
}

/// Grid step used when none is configured: `ρ_s / 8`.
pub fn default_grid_step(geometry: &ArrayGeometry) -> f64 {
    geometry.rayleigh_resolution_m() / 8.0
}

/// `Q = ⌊extent/step⌋ + 1` grid points centered on zero.
pub fn build_dictionary(geometry: &ArrayGeometry, extent_m: f64, grid_step_m: f64) -> Result<Dictionary> {
    if !(grid_step_m > 0.0 && grid_step_m.is_finite()) {
        return Err(TomoError::invalid(format!("grid step must be positive, got {grid_step_m}")));
    }
    if !(extent_m > 0.0 && extent_m.is_finite()) {
        return Err(TomoError::invalid(format!("extent must be positive, got {extent_m}")));
    }
    let window = geometry.unambiguous_window_m();
    if extent_m >= window {
        return Err(TomoError::OutsideWindow {
            elevation_m: extent_m / 2.0,
            half_window_m: window / 2.0,
        });
    }
    let q = (extent_m / grid_step_m + 1e-9).floor() as usize + 1;
    if q < 2 {
        return Err(TomoError::invalid(format!(
            "grid step {grid_step_m} m leaves fewer than two points over {extent_m} m"
        )));
    }
    let start = -0.5 * (q - 1) as f64 * grid_step_m;
    let grid: Vec<f64> = (0..q).map(|i| start + i as f64 * grid_step_m).collect();
    let mut matrix = CMatrix::zeros(geometry.n_observed(), q);
    for (j, &s) in grid.iter().enumerate() {
        matrix.set_column(j, &steering_vector(geometry, s, true)?);
    }
    Ok(Dictionary {
        grid_elevations: grid,
        matrix,
    })
}

/// Default `τ₁ = √(σ·M·2 ln Q)`.
pub fn default_tau_l1(noise_variance: f64, dictionary: &Dictionary) -> f64 {
    let m = dictionary.matrix.nrows() as f64;
    let q = dictionary.len() as f64;
    (noise_variance * m * 2.0 * q.ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Config {
    pub tau: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl L1Config {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            max_iters: 2000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub gamma: CVector,
    pub iters_run: usize,
    pub converged: bool,
    /// Objective after each iteration.
    pub objective: Vec<f64>,
}

pub fn l1_objective(g: &CVector, dictionary: &Dictionary, gamma: &CVector, tau: f64) -> f64 {
    let r = &dictionary.matrix * gamma - g;
    0.5 * r.norm_squared() + tau * gamma.iter().map(|z| z.norm()).sum::<f64>()
}

fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    let m = z.norm();
    if m <= t {
        c(0.0, 0.0)
    } else {
        z * ((m - t) / m)
    }
}

/// FISTA with step `1/σ_max(A_Q)²`; a monotone variant keeps the objective non-increasing.
pub fn solve_l1(g: &CVector, dictionary: &Dictionary, config: &L1Config) -> Result<L1Solution> {
    let a = &dictionary.matrix;
    if g.len() != a.nrows() {
        return Err(TomoError::invalid(format!(
            "observation has {} entries but the dictionary has {} rows",
            g.len(),
            a.nrows()
        )));
    }
    if !(config.tau >= 0.0 && config.tau.is_finite()) || config.max_iters == 0 {
        return Err(TomoError::invalid("ℓ1 solver needs τ ≥ 0 and at least one iteration"));
    }
    let q = a.ncols();
    let lipschitz = a.clone().singular_values().max().powi(2);
    let mut x = CVector::zeros(q);
    let mut objective = Vec::new();
    if lipschitz == 0.0 {
        return Ok(L1Solution {
            gamma: x,
            iters_run: 0,
            converged: true,
            objective,
        });
    }
    let ah = a.adjoint();
    let step = 1.0 / lipschitz;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut f_prev = l1_objective(g, dictionary, &x, config.tau);
    let mut converged = false;
    let mut iters_run = 0;
    for _ in 0..config.max_iters {
        iters_run += 1;
        let grad = &ah * (a * &y - g);
        let z = (&y - grad * c(step, 0.0)).map(|v| soft_threshold(v, config.tau * step));
        let f_z = l1_objective(g, dictionary, &z, config.tau);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = f_z <= f_prev;
        let x_next = if accepted { z.clone() } else { x.clone() };
        let f_next = f_z.min(f_prev);
        y = &x_next + (&z - &x_next) * c(t / t_next, 0.0) + (&x_next - &x) * c((t - 1.0) / t_next, 0.0);
        x = x_next;
        t = t_next;
        objective.push(f_next);
        let change = (f_prev - f_next).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        f_prev = f_next;
        if accepted && change <= config.tol && iters_run > 1 {
            converged = true;
            break;
        }
        if f_next == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(L1Solution {
        gamma: x,
        iters_run,
        converged,
        objective,
    })
}

/// Per-column ℓ1 solves; returns the root-mean-power profile across snapshots.
pub fn solve_l1_snapshots(
    observation: &Observation,
    geometry: &ArrayGeometry,
    dictionary: &Dictionary,
    config: &L1Config,
) -> Result<(CVector, bool)> {
    observation.check_against(geometry)?;
    let l = observation.snapshots();
    let mut power = vec![0.0; dictionary.len()];
    let mut phase_ref = CVector::zeros(dictionary.len());
    let mut converged = true;
    for col in 0..l {
        let g: CVector = observation.data.column(col).into_owned();
        let sol = solve_l1(&g, dictionary, config)?;
        converged &= sol.converged;
        for (q, z) in sol.gamma.iter().enumerate() {
            power[q] += z.norm_sqr() / l as f64;
        }
        if col == 0 {
            phase_ref = sol.gamma;
        }
    }
    let profile = CVector::from_iterator(
        dictionary.len(),
        power.iter().zip(phase_ref.iter()).map(|(&p, z)| {
            let phase = if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) };
            phase * p.sqrt()
        }),
    );
    Ok((profile, converged))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub elevation_m: f64,
    pub amplitude: Complex64,
}

pub fn extract_peaks(gamma: &CVector, dictionary: &Dictionary, max_peaks: usize, min_separation_m: f64) -> Vec<Peak> {
    extract_peaks_with(gamma, dictionary, max_peaks, min_separation_m, DEFAULT_PEAK_THRESHOLD)
}

/// Local maxima of `|γ|` above `rel_threshold·max`, chosen greedily by magnitude subject to
/// the separation constraint and returned in ascending elevation. On a plateau the leftmost
/// cell is the maximum.
pub fn extract_peaks_with(
    gamma: &CVector,
    dictionary: &Dictionary,
    max_peaks: usize,
    min_separation_m: f64,
    rel_threshold: f64,
) -> Vec<Peak> {
    let mags: Vec<f64> = gamma.iter().map(|z| z.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 || max_peaks == 0 {
        return Vec::new();
    }
    let cut = rel_threshold * peak;
    let q = mags.len();
    let mut maxima: Vec<usize> = (0..q)
        .filter(|&i| {
            let m = mags[i];
            let left_ok = i == 0 || m > mags[i - 1];
            let right_ok = i + 1 == q || m >= mags[i + 1];
            m >= cut && left_ok && right_ok
        })
        .collect();
    maxima.sort_by(|&i, &j| mags[j].total_cmp(&mags[i]).then(i.cmp(&j)));
    let mut chosen: Vec<usize> = Vec::new();
    for i in maxima {
        if chosen.len() == max_peaks {
            break;
        }
        let s = dictionary.grid_elevations[i];
        if chosen
            .iter()
            .all(|&j| (dictionary.grid_elevations[j] - s).abs() >= min_separation_m)
        {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
        .into_iter()
        .map(|i| Peak {
            elevation_m: dictionary.grid_elevations[i],
            amplitude: gamma[i],
        })
        .collect()
}
