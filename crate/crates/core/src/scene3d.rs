//! Synthetic building scene, per-pixel tomographic reconstruction and point-cloud metrics.
//!
//! Coordinates are `x` (azimuth), `y` (ground range) and `z` (height). With incidence
//! angle θ the slant-range axis is `l = (0, sin θ, −cos θ)` and the elevation axis is
//! `e = (0, cos θ, sin θ)`; pixel `(x, r)` observes every scatterer on the line
//! `x·ê_x + r·l + s·e`.

use std::io::Write;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::eval::trial_seed;
use crate::method::{estimate, EstimatorConfig};
use crate::signal::{simulate_observation_with, ArrayGeometry, Scene};

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub power: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points, power: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `x y z [power]` per line.
    pub fn write_xyz<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            match &self.power {
                Some(pw) => writeln!(out, "{:.6} {:.6} {:.6} {:.6e}", p[0], p[1], p[2], pw[i])?,
                None => writeln!(out, "{:.6} {:.6} {:.6}", p[0], p[1], p[2])?,
            }
        }
        Ok(())
    }

    /// ASCII PLY with an optional `power` vertex property.
    pub fn write_ply<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ply\nformat ascii 1.0\nelement vertex {}", self.points.len())?;
        writeln!(out, "property double x\nproperty double y\nproperty double z")?;
        if self.power.is_some() {
            writeln!(out, "property double power")?;
        }
        writeln!(out, "end_header")?;
        self.write_xyz(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    Ground,
    Wall,
    Roof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingConfig {
    pub height_m: f64,
    pub incidence_deg: f64,
    /// Azimuth span of the building.
    pub building_x_m: (f64, f64),
    /// Ground range of the radar-facing wall.
    pub front_wall_y_m: f64,
    /// Roof extent along ground range.
    pub roof_depth_m: f64,
    pub azimuth_pixels: usize,
    pub range_pixels: usize,
    pub azimuth_spacing_m: f64,
    pub range_spacing_m: f64,
    /// Slant coordinate of the near edge of the first range pixel.
    pub range_start_m: f64,
    /// Sampling step of the ground-truth cloud.
    pub truth_spacing_m: f64,
}

impl Default for BuildingConfig {
    fn default() -> Self {
        Self {
            height_m: 20.0,
            incidence_deg: 45.0,
            building_x_m: (2.0, 10.0),
            front_wall_y_m: 30.0,
            roof_depth_m: 30.0,
            azimuth_pixels: 12,
            range_pixels: 64,
            azimuth_spacing_m: 1.0,
            range_spacing_m: 1.0,
            range_start_m: 0.0,
            truth_spacing_m: 0.5,
        }
    }
}

impl BuildingConfig {
    fn validate(&self) -> Result<()> {
        let positive = [
            self.azimuth_spacing_m,
            self.range_spacing_m,
            self.truth_spacing_m,
            self.roof_depth_m,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(TomoError::invalid("scene spacings and roof depth must be positive"));
        }
        if !(self.height_m.is_finite() && self.height_m >= 0.0) {
            return Err(TomoError::invalid("building height must be non-negative"));
        }
        if !(self.incidence_deg > 0.0 && self.incidence_deg < 90.0) {
            return Err(TomoError::invalid("incidence angle must lie in (0°, 90°)"));
        }
        if self.azimuth_pixels == 0 || self.range_pixels == 0 {
            return Err(TomoError::invalid("pixel grid must be non-empty"));
        }
        if !(self.building_x_m.0 < self.building_x_m.1) {
            return Err(TomoError::invalid("building azimuth span is empty"));
        }
        Ok(())
    }

    fn angles(&self) -> (f64, f64) {
        let t = self.incidence_deg.to_radians();
        (t.sin(), t.cos())
    }

    /// Elevation span covered by the ground-to-roof interval, `H / sin θ`.
    pub fn elevation_span_m(&self) -> f64 {
        self.height_m / self.angles().0
    }

    fn in_building_azimuth(&self, x: f64) -> bool {
        x >= self.building_x_m.0 && x < self.building_x_m.1
    }

    fn back_wall_y(&self) -> f64 {
        self.front_wall_y_m + self.roof_depth_m
    }

    fn ground_visible(&self, x: f64, y: f64) -> bool {
        if self.height_m == 0.0 || !self.in_building_azimuth(x) {
            return true;
        }
        let (s, c) = self.angles();
        let shadow_end = self.back_wall_y() + self.height_m * s / c;
        y < self.front_wall_y_m || y >= shadow_end
    }

    fn point(&self, x: f64, r: f64, s: f64) -> Point {
        let (sn, cs) = self.angles();
        [x, r * sn + s * cs, -r * cs + s * sn]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PixelScatterer {
    pub surface: Surface,
    /// Relative to the pixel reference elevation.
    pub elevation_m: f64,
    pub point: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pixel {
    pub azimuth_index: usize,
    pub range_index: usize,
    pub x_m: f64,
    pub r_m: f64,
    /// Absolute elevation of the pixel's zero, halfway between ground and roof level.
    pub reference_elevation_m: f64,
    /// Ascending elevation.
    pub scatterers: Vec<PixelScatterer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingScene {
    pub config: BuildingConfig,
    pub pixels: Vec<Pixel>,
}

impl BuildingScene {
    pub fn max_scatterers_per_pixel(&self) -> usize {
        self.pixels.iter().map(|p| p.scatterers.len()).max().unwrap_or(0)
    }

    /// Maps a relative elevation in a pixel to scene coordinates.
    pub fn point_at(&self, pixel: &Pixel, relative_elevation_m: f64) -> Point {
        self.config
            .point(pixel.x_m, pixel.r_m, pixel.reference_elevation_m + relative_elevation_m)
    }
}

fn pixel_scatterers(cfg: &BuildingConfig, x: f64, r: f64) -> (f64, Vec<PixelScatterer>) {
    let (sn, cs) = cfg.angles();
    let h = cfg.height_m;
    let s_ground = r * cs / sn;
    let s_ref = s_ground + 0.5 * h / sn;
    let mut out = Vec::new();
    let mut push = |surface, s: f64| {
        out.push(PixelScatterer {
            surface,
            elevation_m: s - s_ref,
            point: cfg.point(x, r, s),
        })
    };
    let y_ground = r / sn;
    if cfg.ground_visible(x, y_ground) {
        push(Surface::Ground, s_ground);
    }
    if h > 0.0 && cfg.in_building_azimuth(x) {
        let s_wall = (cfg.front_wall_y_m - r * sn) / cs;
        let s_roof = s_ground + h / sn;
        if s_wall >= s_ground && s_wall < s_roof {
            push(Surface::Wall, s_wall);
        }
        let y_roof = y_ground + h * cs / sn;
        if y_roof >= cfg.front_wall_y_m && y_roof < cfg.back_wall_y() {
            push(Surface::Roof, s_roof);
        }
    }
    out.sort_by(|a, b| a.elevation_m.total_cmp(&b.elevation_m));
    (s_ref, out)
}

/// Per-pixel scatterer lists and a ground-truth cloud sampled on the visible surfaces.
pub fn synth_building_scene(config: &BuildingConfig) -> Result<(BuildingScene, PointCloud)> {
    config.validate()?;
    let (sn, cs) = config.angles();
    let mut pixels = Vec::with_capacity(config.azimuth_pixels * config.range_pixels);
    for ia in 0..config.azimuth_pixels {
        for ir in 0..config.range_pixels {
            let x = (ia as f64 + 0.5) * config.azimuth_spacing_m;
            let r = config.range_start_m + (ir as f64 + 0.5) * config.range_spacing_m;
            let (reference, scatterers) = pixel_scatterers(config, x, r);
            pixels.push(Pixel {
                azimuth_index: ia,
                range_index: ir,
                x_m: x,
                r_m: r,
                reference_elevation_m: reference,
                scatterers,
            });
        }
    }

    // Truth surfaces over the footprint illuminated by the pixel grid.
    let x_max = config.azimuth_pixels as f64 * config.azimuth_spacing_m;
    let r_lo = config.range_start_m;
    let r_hi = r_lo + config.range_pixels as f64 * config.range_spacing_m;
    let h = config.height_m;
    let step = config.truth_spacing_m;
    let ticks = |lo: f64, hi: f64| -> Vec<f64> {
        let n = ((hi - lo) / step).floor().max(0.0) as usize;
        (0..=n).map(|i| lo + i as f64 * step).filter(|v| *v < hi).collect()
    };
    let xs = ticks(0.0, x_max);
    let mut truth = Vec::new();
    for &x in &xs {
        for y in ticks(r_lo / sn, r_hi / sn) {
            if config.ground_visible(x, y) {
                truth.push([x, y, 0.0]);
            }
        }
        if h > 0.0 && config.in_building_azimuth(x) {
            // Wall and roof points whose slant coordinate falls inside the grid.
            let slant = |y: f64, z: f64| y * sn - z * cs;
            for z in ticks(0.0, h) {
                let r = slant(config.front_wall_y_m, z);
                if r >= r_lo && r < r_hi {
                    truth.push([x, config.front_wall_y_m, z]);
                }
            }
            for y in ticks(config.front_wall_y_m, config.back_wall_y()) {
                let r = slant(y, h);
                if r >= r_lo && r < r_hi {
                    truth.push([x, y, h]);
                }
            }
        }
    }
    Ok((
        BuildingScene {
            config: config.clone(),
            pixels,
        },
        PointCloud::new(truth),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionSettings {
    pub snr_db: f64,
    pub snapshots: usize,
    pub seed: u64,
    /// Noise variance is set against unit scatterer power.
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reconstruction {
    pub cloud: PointCloud,
    /// `(pixel index, error)` for skipped pixels.
    pub failures: Vec<(usize, String)>,
}

/// Simulates and inverts every pixel; per-pixel failures are recorded and skipped.
pub fn reconstruct_cloud(
    scene: &BuildingScene,
    geometry: &ArrayGeometry,
    settings: &ReconstructionSettings,
) -> Result<Reconstruction> {
    if settings.snapshots == 0 {
        return Err(TomoError::invalid("reconstruction needs at least one snapshot"));
    }
    let half_window = 0.5 * geometry.unambiguous_window_m();
    let extent = (2.0 * (0.5 * scene.config.elevation_span_m() + 1.0)).min(1.98 * half_window);
    let noise_variance = 10f64.powf(-settings.snr_db / 10.0);
    let snapshots = settings.estimator.method.snapshots(settings.snapshots);
    let mut estimator = settings.estimator.clone();
    estimator.extent_m = extent;

    let per_pixel: Vec<std::result::Result<(Vec<Point>, Vec<f64>), String>> = scene
        .pixels
        .par_iter()
        .enumerate()
        .map(|(i, pixel)| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(settings.seed, 0, i as u64));
            let elevations: Vec<f64> = pixel.scatterers.iter().map(|s| s.elevation_m).collect();
            let mut run = || -> Result<(Vec<Point>, Vec<f64>)> {
                let sc = Scene::random_phase(extent, snapshots, &elevations, 1.0, &mut rng)?;
                let obs = simulate_observation_with(geometry, &sc, noise_variance, &mut rng)?;
                let est = estimate(&obs, geometry, &estimator)?;
                let pts = est.elevations_m.iter().map(|&s| scene.point_at(pixel, s)).collect();
                Ok((pts, est.powers))
            };
            run().map_err(|e| e.to_string())
        })
        .collect();

    let mut out = Reconstruction::default();
    let mut power = Vec::new();
    for (i, r) in per_pixel.into_iter().enumerate() {
        match r {
            Ok((pts, pw)) => {
                out.cloud.points.extend(pts);
                power.extend(pw);
            }
            Err(e) => out.failures.push((i, e)),
        }
    }
    out.cloud.power = Some(power);
    Ok(out)
}

/// Plane `normal·p = offset` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub normal: [f64; 3],
    pub offset: f64,
    /// Indices into the fitted point list.
    pub inliers: Vec<usize>,
}

impl PlaneFit {
    pub fn distance(&self, p: &Point) -> f64 {
        (self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] - self.offset).abs()
    }

    pub fn is_vertical(&self) -> bool {
        self.normal[2].abs() < 0.1
    }
}

fn canonical(n: Vector3<f64>, d: f64) -> (Vector3<f64>, f64) {
    // Deterministic sign: first non-negligible component of (z, y, x) positive.
    let key = if n.z.abs() > 1e-12 {
        n.z
    } else if n.y.abs() > 1e-12 {
        n.y
    } else {
        n.x
    };
    if key < 0.0 {
        (-n, -d)
    } else {
        (n, d)
    }
}

fn least_squares_plane(points: &[Point], idx: &[usize]) -> Option<(Vector3<f64>, f64)> {
    let n = idx.len() as f64;
    let mut centroid = Vector3::zeros();
    for &i in idx {
        centroid += Vector3::from(points[i]);
    }
    centroid /= n;
    let mut scatter = Matrix3::zeros();
    for &i in idx {
        let d = Vector3::from(points[i]) - centroid;
        scatter += d * d.transpose();
    }
    let eig = scatter.symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal = eig.eigenvectors.column(k).into_owned().normalize();
    normal.iter().all(|v| v.is_finite()).then(|| canonical(normal, normal.dot(&centroid)))
}

fn collinear(points: &[Point]) -> bool {
    let a = Vector3::from(points[0]);
    let scale = points
        .iter()
        .map(|p| (Vector3::from(*p) - a).norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    let Some(b) = points
        .iter()
        .map(|p| Vector3::from(*p))
        .max_by(|p, q| (p - a).norm().total_cmp(&(q - a).norm()))
    else {
        return true;
    };
    let dir = (b - a) / scale;
    points.iter().all(|p| {
        let v = (Vector3::from(*p) - a) / scale;
        v.cross(&dir).norm() < 1e-9
    })
}

/// Best-consensus plane over `iterations` random 3-point samples, refitted by least
/// squares on its inliers.
pub fn ransac_plane(points: &[Point], inlier_tol_m: f64, iterations: usize, seed: u64) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(TomoError::invalid(format!("RANSAC needs ≥3 points, got {}", points.len())));
    }
    if !(inlier_tol_m > 0.0) || iterations == 0 {
        return Err(TomoError::invalid("RANSAC needs a positive tolerance and iterations"));
    }
    if collinear(points) {
        return Err(TomoError::invalid("all points are collinear; no unique plane"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut best: Option<(usize, Vector3<f64>, f64)> = None;
    for _ in 0..iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        let (a, b, c) = (Vector3::from(points[i]), Vector3::from(points[j]), Vector3::from(points[k]));
        let cross = (b - a).cross(&(c - a));
        let scale = (b - a).norm() * (c - a).norm();
        if !(cross.norm() > 1e-9 * scale) || scale == 0.0 {
            continue;
        }
        let normal = cross.normalize();
        let d = normal.dot(&a);
        let count = points
            .iter()
            .filter(|p| (normal.dot(&Vector3::from(**p)) - d).abs() <= inlier_tol_m)
            .count();
        if best.as_ref().is_none_or(|(c0, _, _)| count > *c0) {
            best = Some((count, normal, d));
        }
    }
    let (_, normal, d) = best.ok_or_else(|| TomoError::Numerical("RANSAC drew no valid sample".into()))?;
    let inliers: Vec<usize> = (0..n)
        .filter(|&i| (normal.dot(&Vector3::from(points[i])) - d).abs() <= inlier_tol_m)
        .collect();
    let (normal, d) = if inliers.len() >= 3 {
        least_squares_plane(points, &inliers).unwrap_or_else(|| canonical(normal, d))
    } else {
        canonical(normal, d)
    };
    let inliers = (0..n)
        .filter(|&i| (normal.dot(&Vector3::from(points[i])) - d).abs() <= inlier_tol_m)
        .collect();
    Ok(PlaneFit {
        normal: [normal.x, normal.y, normal.z],
        offset: d,
        inliers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacSettings {
    pub inlier_tol_m: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RansacSettings {
    fn default() -> Self {
        Self {
            inlier_tol_m: 0.5,
            iterations: 1000,
            seed: 0,
        }
    }
}

/// Ground, roof and wall planes pulled from a reconstructed cloud.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildingPlanes {
    pub ground: Option<Vec<Point>>,
    pub roof: Option<Vec<Point>>,
    pub wall: Option<Vec<Point>>,
}

/// Sequential RANSAC: up to three planes, each fitted to the points left by the previous
/// ones. Vertical planes (`|n_z| < 0.1`) are walls; of the horizontal planes the lower is
/// ground and the higher is roof.
pub fn extract_building_planes(cloud: &PointCloud, settings: &RansacSettings) -> BuildingPlanes {
    let mut remaining = cloud.points.clone();
    let mut horizontal: Vec<(f64, Vec<Point>)> = Vec::new();
    let mut out = BuildingPlanes::default();
    for round in 0..3 {
        let Ok(fit) = ransac_plane(&remaining, settings.inlier_tol_m, settings.iterations, settings.seed + round)
        else {
            break;
        };
        if fit.inliers.len() < 3 {
            break;
        }
        let pts: Vec<Point> = fit.inliers.iter().map(|&i| remaining[i]).collect();
        let mut keep = vec![true; remaining.len()];
        for &i in &fit.inliers {
            keep[i] = false;
        }
        remaining = remaining
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect();
        if fit.is_vertical() {
            if out.wall.is_none() {
                out.wall = Some(pts);
            }
        } else if fit.normal[2].abs() > 0.99 {
            let mean_z = pts.iter().map(|p| p[2]).sum::<f64>() / pts.len() as f64;
            horizontal.push((mean_z, pts));
        }
    }
    horizontal.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut it = horizontal.into_iter();
    match (it.next(), it.next()) {
        (Some(lo), Some(hi)) => {
            out.ground = Some(lo.1);
            out.roof = Some(hi.1);
        }
        (Some(only), None) => {
            // A single horizontal plane is taken as ground.
            out.ground = Some(only.1);
        }
        _ => {}
    }
    out
}

/// `μ = mean |z − h|`, `σ` = sample standard deviation of `z`.
pub fn plane_height_stats(inliers: &[Point], true_height_m: f64) -> Result<(f64, f64)> {
    if inliers.is_empty() {
        return Err(TomoError::invalid("height statistics need at least one point"));
    }
    let z: Vec<f64> = inliers.iter().map(|p| p[2]).collect();
    Ok((mean(z.iter().map(|v| (v - true_height_m).abs())), sample_std(&z)))
}

fn mean<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v.iter().copied());
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Distance from each query point to its nearest neighbour in `reference`.
pub fn nearest_distances(query: &[Point], reference: &[Point]) -> Vec<f64> {
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(reference);
    query
        .par_iter()
        .map(|q| tree.nearest_one::<SquaredEuclidean>(q).distance.sqrt())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudMetrics {
    pub accuracy_mu: f64,
    pub accuracy_sigma: f64,
    pub completeness_mu: f64,
    pub completeness_sigma: f64,
}

/// Accuracy over `min_j ‖P_i − G_j‖`, completeness over `min_i ‖P_i − G_j‖`.
pub fn cloud_accuracy_completeness(reconstructed: &PointCloud, truth: &PointCloud) -> Result<CloudMetrics> {
    if reconstructed.is_empty() || truth.is_empty() {
        return Err(TomoError::invalid("accuracy and completeness need non-empty clouds"));
    }
    let acc = nearest_distances(&reconstructed.points, &truth.points);
    let comp = nearest_distances(&truth.points, &reconstructed.points);
    Ok(CloudMetrics {
        accuracy_mu: mean(acc.iter().copied()),
        accuracy_sigma: sample_std(&acc),
        completeness_mu: mean(comp.iter().copied()),
        completeness_sigma: sample_std(&comp),
    })
}
