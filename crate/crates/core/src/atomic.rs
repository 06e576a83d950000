//! Atomic-norm building blocks shared by the solvers: Hermitian Toeplitz
//! embedding and projection, PSD projection, the dual atomic norm, and the
//! closed-form regularization weight.

use std::f64::consts::PI;

use crate::error::{Result, TomoError};
use crate::linalg::{c, cis, hermitian_eigen, hermitian_part, CMatrix, CVector};
use crate::signal::{ArrayGeometry, Scene};

/// Relative tolerance for "real diagonal" and "Hermitian" checks.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// First column `u` of a Hermitian Toeplitz matrix `T(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzGenerator(CVector);

impl ToeplitzGenerator {
    pub fn new(u: CVector) -> Result<Self> {
        if u.is_empty() {
            return Err(TomoError::invalid("Toeplitz generator is empty"));
        }
        let scale = u.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);
        if u[0].im.abs() > HERMITIAN_TOL * scale {
            return Err(TomoError::invalid(format!(
                "Toeplitz generator diagonal must be real, got imaginary part {}",
                u[0].im
            )));
        }
        let mut u = u;
        u[0].im = 0.0;
        Ok(Self(u))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CVector::zeros(n))
    }

    /// `u[n] = Σ_k p_k·exp(j·2π·ω_k·n)`, the generator of `Σ_k p_k a(ω_k) a(ω_k)^H`.
    pub fn from_spectrum(n: usize, frequencies: &[f64], powers: &[f64]) -> Self {
        let mut u = CVector::zeros(n);
        for (&w, &p) in frequencies.iter().zip(powers) {
            for (k, z) in u.iter_mut().enumerate() {
                *z += cis(2.0 * PI * w * k as f64) * p;
            }
        }
        u[0].im = 0.0;
        Self(u)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn to_matrix(&self) -> CMatrix {
        toeplitz_matrix(&self.0)
    }
}

fn toeplitz_matrix(u: &CVector) -> CMatrix {
    let n = u.len();
    CMatrix::from_fn(n, n, |i, j| if i >= j { u[i - j] } else { u[j - i].conj() })
}

/// `T(u)[j1, j2] = u[j1 − j2]` on and below the diagonal, conjugated above.
pub fn toeplitz_from_generator(u: &CVector) -> Result<CMatrix> {
    Ok(ToeplitzGenerator::new(u.clone())?.to_matrix())
}

/// Nearest Hermitian Toeplitz matrix in Frobenius norm, returned as its generator.
///
/// Each generator entry averages the corresponding sub-diagonal of `T` with the
/// conjugated super-diagonal.
pub fn project_toeplitz(t: &CMatrix) -> ToeplitzGenerator {
    let n = t.nrows();
    assert_eq!(n, t.ncols(), "Toeplitz projection needs a square matrix");
    let mut u = CVector::zeros(n);
    for (k, uk) in u.iter_mut().enumerate() {
        let mut acc = c(0.0, 0.0);
        for j2 in 0..(n - k) {
            let j1 = j2 + k;
            acc += t[(j1, j2)] + t[(j2, j1)].conj();
        }
        *uk = acc / (2.0 * (n - k) as f64);
    }
    u[0].im = 0.0;
    ToeplitzGenerator(u)
}

/// Nearest PSD matrix: Hermitian part, negative eigenvalues clamped to zero.
pub fn project_psd(h: &CMatrix) -> Result<CMatrix> {
    Ok(project_psd_with_spectrum(h)?.0)
}

/// As [`project_psd`], also returning the eigenvalues of the Hermitian part (ascending).
pub fn project_psd_with_spectrum(h: &CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let eig = hermitian_eigen(h)?;
    let n = h.nrows();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.values[k] > 0.0).collect();
    let mut w = CMatrix::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        let scale = eig.values[k].sqrt();
        for i in 0..n {
            w[(i, col)] = eig.vectors[(i, k)] * scale;
        }
    }
    let projected = hermitian_part(&(&w * w.adjoint()));
    Ok((projected, eig.values))
}

/// Atom on the normalized frequency axis, centered on the array midpoint so that it
/// coincides with the elevation steering vector at `ω = 2Δb·s/(λ·r_0)`.
pub fn frequency_atom(geometry: &ArrayGeometry, omega: f64, restrict: bool) -> CVector {
    let center = 0.5 * (geometry.n_full() - 1) as f64;
    let entry = |n: usize| cis(2.0 * PI * omega * (n as f64 - center));
    if restrict {
        CVector::from_iterator(
            geometry.n_observed(),
            geometry.observed_indices().iter().map(|&n| entry(n)),
        )
    } else {
        CVector::from_fn(geometry.n_full(), |n, _| entry(n))
    }
}

/// `‖X^H a_Ω(ω)‖_2`.
fn dual_objective(x: &CMatrix, geometry: &ArrayGeometry, omega: f64) -> f64 {
    let center = 0.5 * (geometry.n_full() - 1) as f64;
    let mut total = 0.0;
    for l in 0..x.ncols() {
        let mut acc = c(0.0, 0.0);
        for (row, &n) in geometry.observed_indices().iter().enumerate() {
            acc += x[(row, l)].conj() * cis(2.0 * PI * omega * (n as f64 - center));
        }
        total += acc.norm_sqr();
    }
    total.sqrt()
}

/// Default oversampling of the dual-norm frequency grid, in multiples of `N`.
pub const DUAL_GRID_OVERSAMPLING: usize = 64;

/// Dual atomic norm `sup_ω ‖X^H a_Ω(ω)‖_2` of an `M × L` matrix.
///
/// Evaluated on a uniform grid of `grid_density` frequencies in `[0, 1)`, then
/// refined by golden-section search around the best grid maxima. The result is a
/// lower bound on the true supremum.
pub fn dual_atomic_norm(x: &CMatrix, geometry: &ArrayGeometry, grid_density: usize) -> Result<f64> {
    if x.nrows() != geometry.n_observed() {
        return Err(TomoError::invalid(format!(
            "matrix has {} rows, geometry observes {}",
            x.nrows(),
            geometry.n_observed()
        )));
    }
    if grid_density < 8 * geometry.n_full() {
        return Err(TomoError::invalid(format!(
            "grid density {grid_density} below 8·N = {}",
            8 * geometry.n_full()
        )));
    }
    let step = 1.0 / grid_density as f64;
    let values: Vec<f64> = (0..grid_density)
        .map(|k| dual_objective(x, geometry, k as f64 * step))
        .collect();
    let mut best = values.iter().copied().fold(0.0_f64, f64::max);
    if best == 0.0 {
        return Ok(0.0);
    }

    let mut peaks: Vec<usize> = (0..grid_density)
        .filter(|&k| {
            let prev = values[(k + grid_density - 1) % grid_density];
            let next = values[(k + 1) % grid_density];
            values[k] >= prev && values[k] >= next
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    for &k in peaks.iter().take(3) {
        let centre = k as f64 * step;
        let refined = golden_section_max(|w| dual_objective(x, geometry, w), centre - step, centre + step, 1e-12);
        best = best.max(refined);
    }
    Ok(best)
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = f1.max(f2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
        best = best.max(f1).max(f2);
    }
    best
}

/// Inputs of the closed-form regularization weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationInput {
    /// Per-element complex noise variance σ.
    pub noise_variance: f64,
    pub n_full: usize,
    pub n_observed: usize,
    pub snapshots: usize,
}

impl RegularizationInput {
    pub fn for_geometry(geometry: &ArrayGeometry, noise_variance: f64, snapshots: usize) -> Self {
        Self {
            noise_variance,
            n_full: geometry.n_full(),
            n_observed: geometry.n_observed(),
            snapshots,
        }
    }
}

/// Weight `τ` and the auxiliary exponent `p` it is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularization {
    pub tau: f64,
    pub p: f64,
}

/// `p = 4L·ln(6L + ln N)`,
/// `τ = 8·sqrt(σM)/(7 − 8/p) · sqrt(2L·ln 17 + ln(πNp + 1) + 1)`.
pub fn regularization(input: &RegularizationInput) -> Result<Regularization> {
    let RegularizationInput {
        noise_variance,
        n_full,
        n_observed,
        snapshots,
    } = *input;
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(TomoError::invalid(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    if n_full < 2 || n_observed == 0 || snapshots == 0 {
        return Err(TomoError::invalid(format!(
            "need N ≥ 2, M ≥ 1, L ≥ 1 (got N={n_full}, M={n_observed}, L={snapshots})"
        )));
    }
    let l = snapshots as f64;
    let n = n_full as f64;
    let p = 4.0 * l * (6.0 * l + n.ln()).ln();
    let denom = 7.0 - 8.0 / p;
    if denom <= 0.0 {
        return Err(TomoError::invalid(format!("p = {p} too small: 7 − 8/p is not positive")));
    }
    let root = (2.0 * l * 17f64.ln() + (PI * n * p + 1.0).ln() + 1.0).sqrt();
    let tau = 8.0 * (noise_variance * n_observed as f64).sqrt() / denom * root;
    Ok(Regularization { tau, p })
}

pub fn regularization_tau(input: &RegularizationInput) -> Result<f64> {
    Ok(regularization(input)?.tau)
}

/// `Σ_k ‖Γ_k‖_2`, the cost of the scene's own atomic decomposition.
pub fn atomic_norm_upper_bound(scene: &Scene) -> f64 {
    scene
        .scatterers()
        .iter()
        .map(|s| s.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .sum()
}
