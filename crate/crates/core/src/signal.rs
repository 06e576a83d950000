//! Tomographic signal model: array geometry, scenes, and synthetic observations.
//!
//! Baselines are centered on the array midpoint, `b_n = n·Δb − D/2` for
//! `n = 0..N`, so the spatial frequency of element `n` is
//! `ζ_n = −2·b_n / (λ·r_0)` and the steering vector entry for elevation `s`
//! is `exp(−j·2π·ζ_n·s)`.
//!
//! Element indices are zero-based throughout the crate.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TomoError};
use crate::linalg::{c, cis, CMatrix, CVector};
use num_complex::Complex64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform virtual array of `n_full` elements, of which `observed` are available.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    wavelength_m: f64,
    reference_range_m: f64,
    n_full: usize,
    element_spacing_m: f64,
    observed: Vec<usize>,
}

impl ArrayGeometry {
    pub fn new(
        wavelength_m: f64,
        reference_range_m: f64,
        n_full: usize,
        element_spacing_m: f64,
        observed: Vec<usize>,
    ) -> Result<Self> {
        for (name, v) in [
            ("wavelength_m", wavelength_m),
            ("reference_range_m", reference_range_m),
            ("element_spacing_m", element_spacing_m),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(TomoError::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if n_full < 2 {
            return Err(TomoError::invalid(format!("n_full must be at least 2, got {n_full}")));
        }
        if observed.is_empty() {
            return Err(TomoError::invalid("observed index set is empty"));
        }
        if observed.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TomoError::invalid("observed indices must be strictly increasing"));
        }
        if let Some(&last) = observed.last() {
            if last >= n_full {
                return Err(TomoError::invalid(format!(
                    "observed index {last} out of bounds for n_full = {n_full}"
                )));
            }
        }
        Ok(Self {
            wavelength_m,
            reference_range_m,
            n_full,
            element_spacing_m,
            observed,
        })
    }

    /// Fully observed uniform array.
    pub fn uniform(
        wavelength_m: f64,
        reference_range_m: f64,
        n_full: usize,
        element_spacing_m: f64,
    ) -> Result<Self> {
        Self::new(
            wavelength_m,
            reference_range_m,
            n_full,
            element_spacing_m,
            (0..n_full).collect(),
        )
    }

    /// Uniform array given its total aperture `D = (N − 1)·Δb`.
    pub fn from_aperture(
        wavelength_m: f64,
        reference_range_m: f64,
        n_full: usize,
        aperture_m: f64,
    ) -> Result<Self> {
        if n_full < 2 {
            return Err(TomoError::invalid(format!("n_full must be at least 2, got {n_full}")));
        }
        Self::uniform(
            wavelength_m,
            reference_range_m,
            n_full,
            aperture_m / (n_full - 1) as f64,
        )
    }

    /// The simulated Ku-band system: 15.2 GHz, r_0 = 500 m, N = 12, D = 1.1 m,
    /// fully observed. Draw an `M = 8` subset with [`Self::with_random_subset`].
    pub fn ku_band_simulation() -> Self {
        Self::from_aperture(SPEED_OF_LIGHT / 15.2e9, 500.0, 12, 1.1)
            .expect("static geometry is valid")
    }

    pub fn with_observed(&self, observed: Vec<usize>) -> Result<Self> {
        Self::new(
            self.wavelength_m,
            self.reference_range_m,
            self.n_full,
            self.element_spacing_m,
            observed,
        )
    }

    /// Same array with a uniformly random `m`-of-`N` observed subset.
    pub fn with_random_subset<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 || m > self.n_full {
            return Err(TomoError::invalid(format!(
                "subset size {m} must lie in 1..={}",
                self.n_full
            )));
        }
        let mut idx = sample(rng, self.n_full, m).into_vec();
        idx.sort_unstable();
        self.with_observed(idx)
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn reference_range_m(&self) -> f64 {
        self.reference_range_m
    }

    pub fn n_full(&self) -> usize {
        self.n_full
    }

    pub fn n_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn element_spacing_m(&self) -> f64 {
        self.element_spacing_m
    }

    pub fn observed_indices(&self) -> &[usize] {
        &self.observed
    }

    pub fn is_fully_observed(&self) -> bool {
        self.observed.len() == self.n_full
    }

    pub fn aperture_m(&self) -> f64 {
        (self.n_full - 1) as f64 * self.element_spacing_m
    }

    pub fn baseline_m(&self, n: usize) -> f64 {
        n as f64 * self.element_spacing_m - 0.5 * self.aperture_m()
    }

    pub fn spatial_frequency(&self, n: usize) -> f64 {
        -2.0 * self.baseline_m(n) / (self.wavelength_m * self.reference_range_m)
    }

    /// Width of the elevation interval that maps one-to-one onto normalized frequency.
    pub fn unambiguous_window_m(&self) -> f64 {
        self.wavelength_m * self.reference_range_m / (2.0 * self.element_spacing_m)
    }

    pub fn rayleigh_resolution_m(&self) -> f64 {
        rayleigh_resolution(self)
    }

    fn check_elevation(&self, elevation_m: f64) -> Result<()> {
        let half = 0.5 * self.unambiguous_window_m();
        if !(elevation_m.is_finite() && elevation_m.abs() < half) {
            return Err(TomoError::OutsideWindow {
                elevation_m,
                half_window_m: half,
            });
        }
        Ok(())
    }
}

/// `λ·r_0 / (2·D)`.
pub fn rayleigh_resolution(geometry: &ArrayGeometry) -> f64 {
    geometry.wavelength_m * geometry.reference_range_m / (2.0 * geometry.aperture_m())
}

/// Steering vector for `elevation_m`, over all `N` elements or restricted to the observed set.
pub fn steering_vector(geometry: &ArrayGeometry, elevation_m: f64, restrict: bool) -> Result<CVector> {
    geometry.check_elevation(elevation_m)?;
    let entry = |n: usize| cis(-2.0 * PI * geometry.spatial_frequency(n) * elevation_m);
    Ok(if restrict {
        CVector::from_iterator(
            geometry.n_observed(),
            geometry.observed.iter().map(|&n| entry(n)),
        )
    } else {
        CVector::from_fn(geometry.n_full, |n, _| entry(n))
    })
}

/// Columns are steering vectors at `elevations_m`.
pub fn steering_matrix(geometry: &ArrayGeometry, elevations_m: &[f64], restrict: bool) -> Result<CMatrix> {
    let rows = if restrict { geometry.n_observed() } else { geometry.n_full };
    let mut a = CMatrix::zeros(rows, elevations_m.len());
    for (k, &s) in elevations_m.iter().enumerate() {
        a.set_column(k, &steering_vector(geometry, s, restrict)?);
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub elevation_m: f64,
    /// One complex reflectivity per snapshot.
    pub amplitudes: Vec<Complex64>,
}

/// Point scatterers along one elevation line; row `k` of the reflectivity matrix Γ
/// is `scatterers[k].amplitudes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    extent_m: f64,
    scatterers: Vec<Scatterer>,
    snapshots: usize,
}

impl Scene {
    pub fn new(extent_m: f64, snapshots: usize, scatterers: Vec<Scatterer>) -> Result<Self> {
        if !(extent_m.is_finite() && extent_m > 0.0) {
            return Err(TomoError::invalid(format!("extent must be positive, got {extent_m}")));
        }
        if snapshots == 0 {
            return Err(TomoError::invalid("scene needs at least one snapshot"));
        }
        for sc in &scatterers {
            if !(sc.elevation_m.abs() < 0.5 * extent_m) {
                return Err(TomoError::invalid(format!(
                    "scatterer elevation {} m outside (−{h}, {h})",
                    sc.elevation_m,
                    h = 0.5 * extent_m
                )));
            }
            if sc.amplitudes.len() != snapshots {
                return Err(TomoError::invalid(format!(
                    "scatterer at {} m has {} amplitudes, expected {snapshots}",
                    sc.elevation_m,
                    sc.amplitudes.len()
                )));
            }
        }
        for (i, a) in scatterers.iter().enumerate() {
            for b in &scatterers[i + 1..] {
                if a.elevation_m == b.elevation_m {
                    return Err(TomoError::invalid(format!(
                        "duplicate scatterer elevation {} m",
                        a.elevation_m
                    )));
                }
            }
        }
        Ok(Self {
            extent_m,
            scatterers,
            snapshots,
        })
    }

    /// Scatterers with equal magnitude and independent uniform phases per snapshot.
    pub fn random_phase<R: Rng + ?Sized>(
        extent_m: f64,
        snapshots: usize,
        elevations_m: &[f64],
        magnitude: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let scatterers = elevations_m
            .iter()
            .map(|&s| Scatterer {
                elevation_m: s,
                amplitudes: (0..snapshots)
                    .map(|_| Complex64::from_polar(magnitude, 2.0 * PI * rng.random::<f64>()))
                    .collect(),
            })
            .collect();
        Self::new(extent_m, snapshots, scatterers)
    }

    pub fn extent_m(&self) -> f64 {
        self.extent_m
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    pub fn elevations_m(&self) -> Vec<f64> {
        self.scatterers.iter().map(|s| s.elevation_m).collect()
    }

    /// Γ as a `K × L` matrix.
    pub fn reflectivity(&self) -> CMatrix {
        CMatrix::from_fn(self.scatterers.len(), self.snapshots, |k, l| {
            self.scatterers[k].amplitudes[l]
        })
    }

    pub fn validate_for(&self, geometry: &ArrayGeometry) -> Result<()> {
        let window = geometry.unambiguous_window_m();
        if self.extent_m >= window {
            return Err(TomoError::invalid(format!(
                "scene extent {} m must be below the unambiguous window {window} m",
                self.extent_m
            )));
        }
        Ok(())
    }
}

/// Measurements on the observed elements: `data = clean + noise`, `M × L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub data: CMatrix,
    pub clean: Option<CMatrix>,
    /// Per-element complex noise variance σ.
    pub noise_variance: f64,
    pub snr_db: Option<f64>,
}

impl Observation {
    pub fn from_data(data: CMatrix, noise_variance: f64) -> Self {
        Self {
            data,
            clean: None,
            noise_variance,
            snr_db: None,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn check_against(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.data.nrows() != geometry.n_observed() {
            return Err(TomoError::invalid(format!(
                "observation has {} rows but the geometry observes {} elements",
                self.data.nrows(),
                geometry.n_observed()
            )));
        }
        if self.data.ncols() == 0 {
            return Err(TomoError::invalid("observation has no snapshots"));
        }
        Ok(())
    }
}

/// Slow-time decimation plan for extracting `snapshots` measurement vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfPlan {
    pub prf_hz: f64,
    pub doppler_bandwidth_hz: f64,
    pub snapshots: usize,
}

impl PrfPlan {
    pub fn sub_prf_hz(&self) -> f64 {
        self.prf_hz / self.snapshots as f64
    }

    /// Snapshot `l` keeps slow-time samples `l, l + L, l + 2L, …`.
    pub fn decimate<T: Clone>(&self, samples: &[T]) -> Vec<Vec<T>> {
        (0..self.snapshots)
            .map(|l| samples.iter().skip(l).step_by(self.snapshots).cloned().collect())
            .collect()
    }
}

pub fn plan_emmv(prf_hz: f64, doppler_bandwidth_hz: f64, snapshots: usize) -> Result<PrfPlan> {
    if !(prf_hz > 0.0 && doppler_bandwidth_hz > 0.0) || snapshots == 0 {
        return Err(TomoError::invalid(
            "PRF, Doppler bandwidth and snapshot count must be positive",
        ));
    }
    let sub = prf_hz / snapshots as f64;
    if sub <= doppler_bandwidth_hz {
        let max_snapshots = ((prf_hz / doppler_bandwidth_hz).ceil() as usize).saturating_sub(1);
        return Err(TomoError::Aliasing {
            sub_prf_hz: sub,
            doppler_bandwidth_hz,
            max_snapshots,
        });
    }
    Ok(PrfPlan {
        prf_hz,
        doppler_bandwidth_hz,
        snapshots,
    })
}

/// Noise-free `A_Ω·Γ`.
pub fn clean_observation(geometry: &ArrayGeometry, scene: &Scene) -> Result<CMatrix> {
    scene.validate_for(geometry)?;
    if scene.is_empty() {
        return Ok(CMatrix::zeros(geometry.n_observed(), scene.snapshots()));
    }
    let a = steering_matrix(geometry, &scene.elevations_m(), true)?;
    Ok(a * scene.reflectivity())
}

/// Adds circularly-symmetric complex Gaussian noise of per-element variance σ.
pub fn simulate_observation(
    geometry: &ArrayGeometry,
    scene: &Scene,
    noise_variance: f64,
    seed: u64,
) -> Result<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_observation_with(geometry, scene, noise_variance, &mut rng)
}

pub fn simulate_observation_with<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    scene: &Scene,
    noise_variance: f64,
    rng: &mut R,
) -> Result<Observation> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(TomoError::invalid(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    let clean = clean_observation(geometry, scene)?;
    let mut data = clean.clone();
    if noise_variance > 0.0 {
        let sd = (0.5 * noise_variance).sqrt();
        for z in data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += c(sd * re, sd * im);
        }
    }
    Ok(Observation {
        data,
        clean: Some(clean),
        noise_variance,
        snr_db: None,
    })
}

/// Mean per-element power of the clean observation.
pub fn mean_clean_power(geometry: &ArrayGeometry, scene: &Scene) -> Result<f64> {
    let clean = clean_observation(geometry, scene)?;
    Ok(clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / clean.len() as f64)
}

/// Signal power that an SNR is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// Mean per-element power of the clean observation.
    #[default]
    MeanElementPower,
    /// Mean power of a single scatterer, `mean_k mean_l |γ_kl|²`.
    PerScatterer,
}

/// Noise variance that puts the clean observation at `snr_db`.
pub fn snr_to_variance(scene: &Scene, geometry: &ArrayGeometry, snr_db: f64) -> Result<f64> {
    snr_to_variance_with(scene, geometry, snr_db, SnrConvention::MeanElementPower)
}

pub fn snr_to_variance_with(
    scene: &Scene,
    geometry: &ArrayGeometry,
    snr_db: f64,
    convention: SnrConvention,
) -> Result<f64> {
    if scene.is_empty() {
        return Err(TomoError::invalid("SNR is undefined for an empty scene"));
    }
    let power = match convention {
        SnrConvention::MeanElementPower => mean_clean_power(geometry, scene)?,
        SnrConvention::PerScatterer => {
            scene.validate_for(geometry)?;
            let total: f64 = scene
                .scatterers()
                .iter()
                .map(|s| s.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() / s.amplitudes.len() as f64)
                .sum();
            total / scene.scatterers().len() as f64
        }
    };
    Ok(power / 10f64.powf(snr_db / 10.0))
}
