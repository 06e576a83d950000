//! Spectrum retrieval from a solved Toeplitz generator.
//!
//! Frequencies come from root-MUSIC on `T(u)`: the noise-subspace polynomial is
//! rooted and the roots nearest the unit circle give the atoms. Powers are then
//! fitted by non-negative least squares against the rank-one atom outer products.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::atomic::{frequency_atom, ToeplitzGenerator};
use crate::error::{Result, TomoError};
use crate::linalg::{c, hermitian_eigen, polynomial_roots, CMatrix};
use crate::signal::{steering_matrix, ArrayGeometry, Observation};
use num_complex::Complex64;

/// Eigenvalues below this fraction of the largest are treated as noise.
pub const DEFAULT_REL_THRESH: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectralEstimate {
    /// Normalized frequencies in `[0, 1)`, ascending.
    pub frequencies: Vec<f64>,
    pub powers: Vec<f64>,
    /// Set when the requested order exceeded the numerical rank of `T(u)`.
    pub rank_deficient: bool,
}

impl SpectralEstimate {
    pub fn model_order(&self) -> usize {
        self.frequencies.len()
    }

    pub fn elevations_m(&self, geometry: &ArrayGeometry) -> Vec<f64> {
        self.frequencies
            .iter()
            .map(|&w| frequency_to_elevation(w, geometry))
            .collect()
    }
}

pub fn estimate_model_order(u: &ToeplitzGenerator, noise_floor: f64) -> Result<usize> {
    estimate_model_order_with(u, noise_floor, DEFAULT_REL_THRESH)
}

/// Number of eigenvalues of `T(u)` above `max(noise_floor, rel_thresh·λ_max)`, capped at `N − 1`.
pub fn estimate_model_order_with(u: &ToeplitzGenerator, noise_floor: f64, rel_thresh: f64) -> Result<usize> {
    let eig = hermitian_eigen(&u.to_matrix())?;
    let lambda_max = eig.values.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Ok(0);
    }
    let cut = noise_floor.max(rel_thresh * lambda_max);
    let count = eig.values.iter().filter(|&&v| v > cut).count();
    Ok(count.min(u.len().saturating_sub(1)))
}

/// Frequencies and powers of `order` atoms explaining `T(u)`.
pub fn vandermonde_decompose(u: &ToeplitzGenerator, order: usize) -> Result<SpectralEstimate> {
    let n = u.len();
    if order == 0 || order >= n {
        return Err(TomoError::invalid(format!("order {order} must lie in 1..{n}")));
    }
    let t = u.to_matrix();
    let eig = hermitian_eigen(&t)?;
    let lambda_max = eig.values[n - 1];
    if !(lambda_max > 0.0) {
        return Err(TomoError::Numerical(
            "Toeplitz matrix has no positive eigenvalue; nothing to decompose".into(),
        ));
    }
    let rank = eig.values.iter().filter(|&&v| v > 1e-10 * lambda_max).count();

    // Noise subspace projector from the n − order smallest eigenvectors.
    let noise = eig.vectors.columns(0, n - order);
    let proj = noise * noise.adjoint();
    let mut coeffs = vec![c(0.0, 0.0); 2 * n - 1];
    for j1 in 0..n {
        for j2 in 0..n {
            coeffs[j2 + n - 1 - j1] += proj[(j1, j2)];
        }
    }
    // Negligible end coefficients only carry roots at 0 or infinity.
    let scale = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let keep = |z: &Complex64| z.norm() > 1e-12 * scale;
    let lo = coeffs.iter().position(keep).unwrap_or(0);
    let hi = coeffs.iter().rposition(keep).unwrap_or(0);
    let roots = polynomial_roots(&coeffs[lo..=hi])?;

    let orthogonality = |w: f64| -> f64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * w);
        let mut acc = c(0.0, 0.0);
        let mut zk = c(1.0, 0.0);
        for &ck in &coeffs {
            acc += ck * zk;
            zk *= z;
        }
        (acc * Complex64::from_polar(1.0, -2.0 * PI * w * (n - 1) as f64)).re.abs()
    };

    let mut candidates: Vec<(f64, f64, f64)> = roots
        .iter()
        .filter(|z| z.norm() <= 1.0 + 1e-6)
        .map(|z| {
            let w = (z.arg() / (2.0 * PI)).rem_euclid(1.0);
            ((z.norm() - 1.0).abs(), orthogonality(w), w)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut frequencies: Vec<f64> = Vec::with_capacity(order);
    for &(_, _, w) in &candidates {
        if frequencies.len() == order {
            break;
        }
        if frequencies.iter().all(|&f| circular_distance(f, w) > 1e-7) {
            frequencies.push(w);
        }
    }
    if frequencies.len() < order {
        return Err(TomoError::Numerical(format!(
            "root-MUSIC found {} distinct roots, expected {order}",
            frequencies.len()
        )));
    }
    frequencies.sort_by(f64::total_cmp);

    let powers = fit_powers(&t, &frequencies)?;
    let (frequencies, powers): (Vec<f64>, Vec<f64>) = frequencies
        .into_iter()
        .zip(powers)
        .filter(|&(_, p)| p > 0.0)
        .unzip();
    Ok(SpectralEstimate {
        frequencies,
        powers,
        rank_deficient: order > rank,
    })
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// NNLS fit of `T ≈ Σ p_k a(ω_k) a(ω_k)^H` (Lawson–Hanson active set).
fn fit_powers(t: &CMatrix, frequencies: &[f64]) -> Result<Vec<f64>> {
    let n = t.nrows();
    let k = frequencies.len();
    let atoms: Vec<_> = frequencies
        .iter()
        .map(|&w| {
            nalgebra::DVector::from_fn(n, |i, _| Complex64::from_polar(1.0, 2.0 * PI * w * i as f64))
        })
        .collect();
    let gram = DMatrix::from_fn(k, k, |i, j| atoms[i].dotc(&atoms[j]).norm_sqr());
    let rhs = DVector::from_fn(k, |i, _| (atoms[i].adjoint() * t * &atoms[i])[(0, 0)].re);
    nnls(&gram, &rhs)
}

/// Minimizes `½ pᵀ G p − bᵀ p` over `p ≥ 0` for symmetric PSD `G`.
pub(crate) fn nnls(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<Vec<f64>> {
    let k = rhs.len();
    let mut p = DVector::<f64>::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * gram.diagonal().amax().max(1.0);
    for _ in 0..(3 * k + 10) {
        let grad = rhs - gram * &p;
        let candidate = (0..k)
            .filter(|&i| !passive[i])
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        match candidate {
            Some(i) if grad[i] > tol => passive[i] = true,
            _ => break,
        }
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub_g = DMatrix::from_fn(idx.len(), idx.len(), |a, b| gram[(idx[a], idx[b])]);
            let sub_b = DVector::from_fn(idx.len(), |a, _| rhs[idx[a]]);
            let z = crate::linalg::solve_real(&sub_g, &sub_b)
                .ok_or_else(|| TomoError::Numerical("singular Gram matrix in power fit".into()))?;
            if z.iter().all(|&v| v > 0.0) {
                for (a, &i) in idx.iter().enumerate() {
                    p[i] = z[a];
                }
                break;
            }
            // step back toward feasibility
            let mut alpha = 1.0_f64;
            for (a, &i) in idx.iter().enumerate() {
                if z[a] <= 0.0 {
                    let denom = p[i] - z[a];
                    if denom > 0.0 {
                        alpha = alpha.min(p[i] / denom);
                    }
                }
            }
            for (a, &i) in idx.iter().enumerate() {
                p[i] += alpha * (z[a] - p[i]);
                if p[i] <= 1e-15 {
                    p[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    Ok(p.iter().copied().collect())
}

/// Inverts `ω = 2Δb·s/(λ·r_0) mod 1` into the centered window `[−W/2, W/2)`.
pub fn frequency_to_elevation(omega: f64, geometry: &ArrayGeometry) -> f64 {
    let centered = (omega + 0.5).rem_euclid(1.0) - 0.5;
    centered * geometry.unambiguous_window_m()
}

pub fn elevation_to_frequency(elevation_m: f64, geometry: &ArrayGeometry) -> f64 {
    (elevation_m / geometry.unambiguous_window_m()).rem_euclid(1.0)
}

/// Least-squares reflectivities `argmin_Γ ‖G_Ω − A_Ω(ŝ)·Γ‖_F`, `K̂ × L`.
pub fn estimate_amplitudes(
    observation: &Observation,
    geometry: &ArrayGeometry,
    elevations_m: &[f64],
) -> Result<CMatrix> {
    observation.check_against(geometry)?;
    if elevations_m.is_empty() {
        return Err(TomoError::invalid("amplitude fit needs at least one elevation"));
    }
    let a = steering_matrix(geometry, elevations_m, true)?;
    if a.ncols() > a.nrows() {
        return Err(TomoError::RankDeficient(elevations_m.to_vec()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-8 * smax) {
        return Err(TomoError::RankDeficient(elevations_m.to_vec()));
    }
    svd.solve(&observation.data, 0.0)
        .map_err(|e| TomoError::Numerical(format!("least-squares solve failed: {e}")))
}

/// `Σ_k p_k·a(ω_k)·a(ω_k)^H` over the full array.
pub fn rebuild_toeplitz(geometry: &ArrayGeometry, estimate: &SpectralEstimate) -> CMatrix {
    let n = geometry.n_full();
    let mut t = CMatrix::zeros(n, n);
    for (&w, &p) in estimate.frequencies.iter().zip(&estimate.powers) {
        let a = frequency_atom(geometry, w, false);
        t += &a * a.adjoint() * c(p, 0.0);
    }
    t
}
