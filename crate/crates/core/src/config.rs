//! Run configuration in TOML with dotted keys, e.g. `geometry.n_full = 12`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Result, TomoError};
use crate::eval::ScattererCount;
use crate::linalg::c;
use crate::method::{EstimatorConfig, Method};
use crate::scene3d::{BuildingConfig, RansacSettings};
use crate::signal::{ArrayGeometry, Scatterer, Scene, SnrConvention, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub snapshots: Option<usize>,
    #[serde(default)]
    pub geometry: GeometrySection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub scene: SceneSection,
    #[serde(default)]
    pub montecarlo: MonteCarloSection,
    #[serde(default)]
    pub scene3d: Scene3dSection,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub wavelength_m: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub reference_range_m: Option<f64>,
    pub n_full: Option<usize>,
    pub element_spacing_m: Option<f64>,
    pub aperture_m: Option<f64>,
    /// 0-based element indices.
    pub observed_indices: Option<Vec<usize>>,
    pub random_subset_size: Option<usize>,
    pub extent_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Per-element complex noise variance.
    pub sigma: Option<f64>,
    pub snr_db: Option<f64>,
    /// `mean_element_power` or `per_scatterer`.
    pub snr_convention: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub method: Option<String>,
    pub tau: Option<f64>,
    pub penalty_eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol_primal: Option<f64>,
    pub tol_change: Option<f64>,
    pub adaptive_penalty: Option<bool>,
    pub rel_thresh: Option<f64>,
    pub noise_floor_tau_factor: Option<f64>,
    pub grid_step_m: Option<f64>,
    pub tau_l1: Option<f64>,
    pub l1_max_iters: Option<usize>,
    pub l1_tol: Option<f64>,
    pub max_peaks: Option<usize>,
    pub min_peak_separation_cells: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScattererEntry {
    pub elevation_m: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Radians; random per snapshot when absent.
    pub phase_rad: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    #[serde(default)]
    pub scatterers: Vec<ScattererEntry>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    /// `snr`, `alpha` or `L`.
    pub sweep: Option<String>,
    pub values: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub snr_db: Option<f64>,
    pub alpha: Option<f64>,
    pub snapshots: Option<usize>,
    /// `1`, `2` or `random`.
    pub n_scatterers: Option<toml::Value>,
    pub subset_size: Option<usize>,
    pub threshold_m: Option<f64>,
    pub record_runtime: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scene3dSection {
    pub height_m: Option<f64>,
    pub incidence_deg: Option<f64>,
    pub building_x_m: Option<[f64; 2]>,
    pub front_wall_y_m: Option<f64>,
    pub roof_depth_m: Option<f64>,
    pub azimuth_pixels: Option<usize>,
    pub range_pixels: Option<usize>,
    pub azimuth_spacing_m: Option<f64>,
    pub range_spacing_m: Option<f64>,
    pub range_start_m: Option<f64>,
    pub truth_spacing_m: Option<f64>,
    pub snr_db: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub snapshots: Option<usize>,
    pub ransac_tol_m: Option<f64>,
    pub ransac_iterations: Option<usize>,
}

fn missing(key: &str) -> TomoError {
    TomoError::Config(format!("missing required key '{key}'"))
}

fn config_err(e: TomoError) -> TomoError {
    match e {
        TomoError::InvalidInput(m) => TomoError::Config(m),
        other => other,
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| TomoError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TomoError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// The full array; Table I values fill unspecified keys.
    pub fn full_geometry(&self) -> Result<ArrayGeometry> {
        let g = &self.geometry;
        let base = ArrayGeometry::ku_band_simulation();
        let wavelength = match (g.wavelength_m, g.carrier_hz) {
            (Some(w), _) => w,
            (None, Some(f)) => SPEED_OF_LIGHT / f,
            (None, None) => base.wavelength_m(),
        };
        let r0 = g.reference_range_m.unwrap_or(base.reference_range_m());
        let n = g.n_full.unwrap_or(base.n_full());
        let geometry = match (g.element_spacing_m, g.aperture_m) {
            (Some(_), Some(_)) => {
                return Err(TomoError::Config(
                    "set only one of 'geometry.element_spacing_m' and 'geometry.aperture_m'".into(),
                ))
            }
            (Some(d), None) => ArrayGeometry::uniform(wavelength, r0, n, d),
            (None, Some(a)) => ArrayGeometry::from_aperture(wavelength, r0, n, a),
            (None, None) => ArrayGeometry::from_aperture(wavelength, r0, n, base.aperture_m()),
        };
        geometry.map_err(config_err)
    }

    /// Full array restricted to `observed_indices`, or a seeded random subset.
    pub fn observed_geometry(&self) -> Result<ArrayGeometry> {
        let full = self.full_geometry()?;
        match (&self.geometry.observed_indices, self.geometry.random_subset_size) {
            (Some(_), Some(_)) => Err(TomoError::Config(
                "set only one of 'geometry.observed_indices' and 'geometry.random_subset_size'".into(),
            )),
            (Some(idx), None) => {
                let mut idx = idx.clone();
                idx.sort_unstable();
                full.with_observed(idx).map_err(config_err)
            }
            (None, Some(m)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
                full.with_random_subset(m, &mut rng).map_err(config_err)
            }
            (None, None) => Ok(full),
        }
    }

    pub fn extent_m(&self) -> f64 {
        self.geometry.extent_m.unwrap_or(40.0)
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots.unwrap_or(1)
    }

    pub fn noise_sigma(&self) -> Result<f64> {
        self.noise.sigma.ok_or_else(|| missing("noise.sigma"))
    }

    pub fn snr_convention(&self) -> Result<SnrConvention> {
        match self.noise.snr_convention.as_deref() {
            None | Some("mean_element_power") => Ok(SnrConvention::MeanElementPower),
            Some("per_scatterer") => Ok(SnrConvention::PerScatterer),
            Some(other) => Err(TomoError::Config(format!(
                "unknown noise.snr_convention '{other}'; use mean_element_power or per_scatterer"
            ))),
        }
    }

    pub fn method(&self) -> Result<Method> {
        self.solver.method.as_deref().unwrap_or("empast").parse()
    }

    pub fn estimator(&self, method: Method) -> EstimatorConfig {
        let s = &self.solver;
        let mut e = EstimatorConfig::new(method);
        e.tau = s.tau;
        e.extent_m = self.extent_m();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = s.$f { e.$f = v; } )* };
        }
        set!(
            penalty_eta,
            max_iters,
            tol_primal,
            tol_change,
            adaptive_penalty,
            rel_thresh,
            noise_floor_tau_factor,
            l1_max_iters,
            l1_tol,
            max_peaks,
            min_peak_separation_cells
        );
        e.grid_step_m = s.grid_step_m;
        e.tau_l1 = s.tau_l1;
        e
    }

    /// Scatterers from `scene.scatterers`; missing phases are drawn from the seed.
    pub fn scene(&self) -> Result<Scene> {
        use rand::Rng;
        let l = self.snapshots();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        let scatterers = self
            .scene
            .scatterers
            .iter()
            .map(|s| Scatterer {
                elevation_m: s.elevation_m,
                amplitudes: (0..l)
                    .map(|_| {
                        let ph = s
                            .phase_rad
                            .unwrap_or_else(|| 2.0 * std::f64::consts::PI * rng.random::<f64>());
                        c(s.amplitude * ph.cos(), s.amplitude * ph.sin())
                    })
                    .collect(),
            })
            .collect();
        Scene::new(self.extent_m(), l, scatterers).map_err(config_err)
    }

    pub fn methods(list: &Option<Vec<String>>) -> Result<Vec<Method>> {
        match list {
            None => Ok(vec![Method::Empast]),
            Some(v) if v.is_empty() => Err(TomoError::Config("method list is empty".into())),
            Some(v) => v.iter().map(|m| m.parse()).collect(),
        }
    }

    pub fn scatterer_count(&self) -> Result<ScattererCount> {
        match &self.montecarlo.n_scatterers {
            None => Ok(ScattererCount::Random),
            Some(toml::Value::Integer(1)) => Ok(ScattererCount::One),
            Some(toml::Value::Integer(2)) => Ok(ScattererCount::Two),
            Some(toml::Value::String(s)) if s == "random" => Ok(ScattererCount::Random),
            Some(other) => Err(TomoError::Config(format!(
                "montecarlo.n_scatterers must be 1, 2 or \"random\", got {other}"
            ))),
        }
    }

    pub fn building(&self) -> BuildingConfig {
        let s = &self.scene3d;
        let mut b = BuildingConfig::default();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = s.$f { b.$f = v; } )* };
        }
        set!(
            height_m,
            incidence_deg,
            front_wall_y_m,
            roof_depth_m,
            azimuth_pixels,
            range_pixels,
            azimuth_spacing_m,
            range_spacing_m,
            range_start_m,
            truth_spacing_m
        );
        if let Some([a, z]) = s.building_x_m {
            b.building_x_m = (a, z);
        }
        b
    }

    pub fn ransac(&self) -> RansacSettings {
        let mut r = RansacSettings {
            seed: self.seed(),
            ..RansacSettings::default()
        };
        if let Some(t) = self.scene3d.ransac_tol_m {
            r.inlier_tol_m = t;
        }
        if let Some(n) = self.scene3d.ransac_iterations {
            r.iterations = n;
        }
        r
    }
}
