//! Monte-Carlo harness and elevation metrics: σ_s, P_D with Wilson intervals, and κ.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, TomoError};
use crate::method::{estimate, EstimatorConfig, Method};
use crate::signal::{simulate_observation_with, snr_to_variance_with, ArrayGeometry, Scene, SnrConvention};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

pub const CSV_HEADER: &str = "method,snr_db,alpha,L,trials,sigma_s,p_d,p_d_ci_lo,p_d_ci_hi,mean_runtime_ms";

/// Scatterer count per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScattererCount {
    One,
    Two,
    /// One or two with equal probability.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub snr_db: f64,
    pub n_scatterers: ScattererCount,
    /// Fixed spacing for two scatterers; `None` draws a well-separated pair.
    pub separation_m: Option<f64>,
    pub snapshots: usize,
    pub method: Method,
    pub seed: u64,
    /// Observed elements drawn per trial.
    pub subset_m: usize,
    pub extent_m: f64,
    pub snr_convention: SnrConvention,
}

impl TrialSpec {
    fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        if let Some(ds) = self.separation_m {
            if !(ds > 0.0) || ds >= self.extent_m {
                return Err(TomoError::invalid(format!(
                    "separation {ds} m must lie in (0, {})",
                    self.extent_m
                )));
            }
        }
        if self.snapshots == 0 {
            return Err(TomoError::invalid("trials need at least one snapshot"));
        }
        if self.subset_m == 0 || self.subset_m > geometry.n_full() {
            return Err(TomoError::invalid(format!(
                "subset size {} must lie in 1..={}",
                self.subset_m,
                geometry.n_full()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub truths_m: Vec<f64>,
    pub estimates_m: Vec<f64>,
    pub runtime_ms: f64,
    /// Solver failure message; the trial then has no estimates.
    pub failure: Option<String>,
}

/// Minimum spacing of a "well separated" pair: `4·S₁/(N − 1)`.
pub fn well_separated_spacing(geometry: &ArrayGeometry, extent_m: f64) -> f64 {
    4.0 * extent_m / (geometry.n_full() as f64 - 1.0)
}

fn draw_elevations<R: Rng>(spec: &TrialSpec, geometry: &ArrayGeometry, rng: &mut R) -> Vec<f64> {
    let half = 0.5 * spec.extent_m;
    let two = match spec.n_scatterers {
        ScattererCount::One => false,
        ScattererCount::Two => true,
        ScattererCount::Random => rng.random::<bool>(),
    };
    if !two {
        return vec![rng.random_range(-half..half)];
    }
    match spec.separation_m {
        Some(ds) => {
            let s1 = rng.random_range(-half..half - ds);
            vec![s1, s1 + ds]
        }
        None => {
            let min_gap = well_separated_spacing(geometry, spec.extent_m).min(0.9 * spec.extent_m);
            loop {
                let a = rng.random_range(-half..half);
                let b = rng.random_range(-half..half);
                if (a - b).abs() > min_gap {
                    return vec![a.min(b), a.max(b)];
                }
            }
        }
    }
}

/// Simulates one trial on a fresh random subset and runs the configured method.
pub fn run_trial(
    spec: &TrialSpec,
    full_geometry: &ArrayGeometry,
    estimator: &EstimatorConfig,
    record_runtime: bool,
) -> Result<TrialOutcome> {
    spec.validate(full_geometry)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let geometry = full_geometry.with_random_subset(spec.subset_m, &mut rng)?;
    let truths = draw_elevations(spec, full_geometry, &mut rng);
    let snapshots = spec.method.snapshots(spec.snapshots);
    let scene = Scene::random_phase(spec.extent_m, snapshots, &truths, 1.0, &mut rng)?;
    let sigma = snr_to_variance_with(&scene, &geometry, spec.snr_db, spec.snr_convention)?;
    let mut observation = simulate_observation_with(&geometry, &scene, sigma, &mut rng)?;
    observation.snr_db = Some(spec.snr_db);
    let mut config = estimator.clone();
    config.method = spec.method;
    config.extent_m = spec.extent_m;
    let start = Instant::now();
    let result = estimate(&observation, &geometry, &config);
    let runtime_ms = if record_runtime {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(match result {
        Ok(r) => TrialOutcome {
            truths_m: truths,
            estimates_m: r.elevations_m,
            runtime_ms,
            failure: None,
        },
        Err(e) => TrialOutcome {
            truths_m: truths,
            estimates_m: Vec::new(),
            runtime_ms,
            failure: Some(e.to_string()),
        },
    })
}

/// For each truth, the index of its matched estimate. Both lists must be ascending.
///
/// The assignment is the order-preserving one minimizing the summed squared error,
/// which is optimal for points on a line. With fewer estimates than truths the
/// pairing is partial and the unmatched truths are `None`.
pub fn match_scatterers(truths: &[f64], estimates: &[f64]) -> Vec<Option<usize>> {
    let k = truths.len();
    let m = estimates.len();
    if k == 0 {
        return Vec::new();
    }
    if m == 0 {
        return vec![None; k];
    }
    if m < k {
        // Match every estimate to a distinct truth instead.
        let inverse = match_scatterers(estimates, truths);
        let mut out = vec![None; k];
        for (e, t) in inverse.into_iter().enumerate() {
            if let Some(t) = t {
                out[t] = Some(e);
            }
        }
        return out;
    }
    // cost[i][j]: best cost pairing truths[..i] into estimates[..j].
    let inf = f64::INFINITY;
    let mut cost = vec![vec![inf; m + 1]; k + 1];
    for j in 0..=m {
        cost[0][j] = 0.0;
    }
    for i in 1..=k {
        for j in i..=m {
            let take = cost[i - 1][j - 1] + (truths[i - 1] - estimates[j - 1]).powi(2);
            let skip = cost[i][j - 1];
            cost[i][j] = if take <= skip { take } else { skip };
        }
    }
    let mut out = vec![None; k];
    let (mut i, mut j) = (k, m);
    while i > 0 {
        let take = cost[i - 1][j - 1] + (truths[i - 1] - estimates[j - 1]).powi(2);
        if take <= cost[i][j - 1] {
            out[i - 1] = Some(j - 1);
            i -= 1;
        }
        j -= 1;
    }
    out
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn matched_errors(outcome: &TrialOutcome) -> Vec<Option<f64>> {
    let truths = sorted(&outcome.truths_m);
    let estimates = sorted(&outcome.estimates_m);
    match_scatterers(&truths, &estimates)
        .into_iter()
        .zip(&truths)
        .map(|(m, t)| m.map(|j| estimates[j] - t))
        .collect()
}

/// Normalized RMSE over fully paired trials; `None` when no trial is eligible.
pub fn sigma_s(trials: &[TrialOutcome], rayleigh_m: f64) -> Option<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for t in trials {
        let errs = matched_errors(t);
        if errs.is_empty() || errs.iter().any(Option::is_none) {
            continue;
        }
        total += errs.iter().map(|e| e.unwrap().powi(2)).sum::<f64>() / errs.len() as f64;
        count += 1;
    }
    (count > 0).then(|| (total / count as f64).sqrt() / rayleigh_m)
}

pub fn is_detection(outcome: &TrialOutcome, threshold_m: f64) -> bool {
    matched_errors(outcome)
        .iter()
        .all(|e| matches!(e, Some(d) if d.abs() <= threshold_m))
}

pub fn prob_detection(trials: &[TrialOutcome], threshold_m: f64) -> f64 {
    if trials.is_empty() {
        return 0.0;
    }
    let hits = trials.iter().filter(|t| is_detection(t, threshold_m)).count();
    hits as f64 / trials.len() as f64
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// SplitMix64 finalizer used to derive independent per-trial seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn trial_seed(seed: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ cell) ^ trial)
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub method: Method,
    pub snr_db: f64,
    /// Pair spacing in Rayleigh units; `None` uses well-separated pairs.
    pub alpha: Option<f64>,
    pub snapshots: usize,
    pub n_scatterers: ScattererCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub trials_per_cell: usize,
    pub seed: u64,
    pub subset_m: usize,
    pub extent_m: f64,
    /// Detection threshold; `None` means `ρ_s/8`.
    pub threshold_m: Option<f64>,
    pub snr_convention: SnrConvention,
    pub record_runtime: bool,
    pub estimator: EstimatorConfig,
}

impl McConfig {
    pub fn new(trials_per_cell: usize, seed: u64) -> Self {
        Self {
            trials_per_cell,
            seed,
            subset_m: 8,
            extent_m: 40.0,
            threshold_m: None,
            snr_convention: SnrConvention::default(),
            record_runtime: false,
            estimator: EstimatorConfig::new(Method::Empast),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub method: Method,
    pub snr_db: f64,
    pub alpha: Option<f64>,
    pub snapshots: usize,
    pub trials: usize,
    pub sigma_s: Option<f64>,
    pub p_d: f64,
    pub p_d_ci: (f64, f64),
    /// Absent unless runtime recording is enabled.
    pub mean_runtime_ms: Option<f64>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct McReport {
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Missed detections are excluded from σ_s; an undefined σ_s or runtime is written as `nan`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6}"));
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{}",
                r.method,
                r.snr_db,
                r.alpha.map_or_else(String::new, |a| a.to_string()),
                r.snapshots,
                r.trials,
                opt(r.sigma_s),
                r.p_d,
                r.p_d_ci.0,
                r.p_d_ci.1,
                opt(r.mean_runtime_ms),
            )?;
        }
        Ok(())
    }
}

/// Runs every trial of one cell; outcomes are ordered by trial index.
pub fn run_cell(
    cell: &McCell,
    cell_index: u64,
    geometry: &ArrayGeometry,
    config: &McConfig,
) -> Result<Vec<TrialOutcome>> {
    let rho = geometry.rayleigh_resolution_m();
    let spec_for = |trial: usize| TrialSpec {
        snr_db: cell.snr_db,
        n_scatterers: cell.n_scatterers,
        separation_m: cell.alpha.map(|a| a * rho),
        snapshots: cell.snapshots,
        method: cell.method,
        seed: trial_seed(config.seed, cell_index, trial as u64),
        subset_m: config.subset_m,
        extent_m: config.extent_m,
        snr_convention: config.snr_convention,
    };
    spec_for(0).validate(geometry)?;
    (0..config.trials_per_cell)
        .into_par_iter()
        .map(|t| run_trial(&spec_for(t), geometry, &config.estimator, config.record_runtime))
        .collect()
}

pub fn summarize(cell: &McCell, outcomes: &[TrialOutcome], geometry: &ArrayGeometry, config: &McConfig) -> McRow {
    let rho = geometry.rayleigh_resolution_m();
    let threshold = config.threshold_m.unwrap_or(rho / 8.0);
    let hits = outcomes.iter().filter(|t| is_detection(t, threshold)).count();
    let n = outcomes.len();
    McRow {
        method: cell.method,
        snr_db: cell.snr_db,
        alpha: cell.alpha,
        snapshots: cell.method.snapshots(cell.snapshots),
        trials: n,
        sigma_s: sigma_s(outcomes, rho),
        p_d: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        p_d_ci: wilson_interval(hits, n, Z_95),
        mean_runtime_ms: (config.record_runtime && n > 0)
            .then(|| outcomes.iter().map(|t| t.runtime_ms).sum::<f64>() / n as f64),
        failures: outcomes.iter().filter(|t| t.failure.is_some()).count(),
    }
}

/// All cells × trials; an empty report when `trials_per_cell` is zero.
pub fn run_monte_carlo(cells: &[McCell], geometry: &ArrayGeometry, config: &McConfig) -> Result<McReport> {
    if config.trials_per_cell == 0 {
        return Ok(McReport::default());
    }
    let mut rows = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let outcomes = run_cell(cell, i as u64, geometry, config)?;
        rows.push(summarize(cell, &outcomes, geometry, config));
    }
    Ok(McReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaPoint {
    pub separation_m: f64,
    pub p_d: f64,
    pub p_d_ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaResult {
    /// `ρ_s / ρ_PD`; `0.5` with `floor` set when no spacing reached the target.
    pub kappa: f64,
    pub rho_pd_m: Option<f64>,
    pub floor: bool,
    pub sweep: Vec<KappaPoint>,
}

/// Descending sweep over `Δs = k·ρ_s/20`, `k = 40, 39, …, 1`, with `trial_budget` trials per point.
///
/// A spacing passes when its P_D point estimate reaches `pd_target`. The sweep stops at
/// the first spacing whose Wilson upper bound falls below the target.
pub fn super_resolution_factor(
    method: Method,
    snr_db: f64,
    snapshots: usize,
    pd_target: f64,
    trial_budget: usize,
    geometry: &ArrayGeometry,
    config: &McConfig,
) -> Result<KappaResult> {
    if !(pd_target > 0.0 && pd_target < 1.0) {
        return Err(TomoError::invalid(format!("P_D target must lie in (0, 1), got {pd_target}")));
    }
    if trial_budget == 0 {
        return Err(TomoError::invalid("κ sweep needs at least one trial per spacing"));
    }
    let rho = geometry.rayleigh_resolution_m();
    let mut cfg = config.clone();
    cfg.trials_per_cell = trial_budget;
    let mut sweep = Vec::new();
    let mut best: Option<f64> = None;
    for k in (1..=40u32).rev() {
        let alpha = k as f64 / 20.0;
        let cell = McCell {
            method,
            snr_db,
            alpha: Some(alpha),
            snapshots,
            n_scatterers: ScattererCount::Two,
        };
        let outcomes = run_cell(&cell, 1000 + k as u64, geometry, &cfg)?;
        let row = summarize(&cell, &outcomes, geometry, &cfg);
        sweep.push(KappaPoint {
            separation_m: alpha * rho,
            p_d: row.p_d,
            p_d_ci: row.p_d_ci,
        });
        if row.p_d >= pd_target {
            best = Some(alpha * rho);
        }
        if row.p_d_ci.1 < pd_target {
            break;
        }
    }
    Ok(match best {
        Some(r) => KappaResult {
            kappa: rho / r,
            rho_pd_m: Some(r),
            floor: false,
            sweep,
        },
        None => KappaResult {
            kappa: 0.5,
            rho_pd_m: None,
            floor: true,
            sweep,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn outcome(truths: &[f64], estimates: &[f64]) -> TrialOutcome {
        TrialOutcome {
            truths_m: truths.to_vec(),
            estimates_m: estimates.to_vec(),
            runtime_ms: 0.0,
            failure: None,
        }
    }

    #[test]
    fn matching_examples() {
        assert_eq!(match_scatterers(&[1.0, 2.0], &[1.0, 2.0]), vec![Some(0), Some(1)]);
        assert_eq!(match_scatterers(&[0.0, 5.0], &[0.1, 4.9]), vec![Some(0), Some(1)]);
        let partial = match_scatterers(&[0.0, 5.0], &[4.8]);
        assert_eq!(partial, vec![None, Some(0)]);
        assert_eq!(match_scatterers(&[2.0], &[-3.0, 1.9, 8.0]), vec![Some(1)]);
        assert_eq!(match_scatterers(&[0.0, 5.0], &[]), vec![None, None]);
    }

    #[test]
    fn sigma_examples() {
        let rho = 4.0;
        assert_eq!(sigma_s(&[outcome(&[1.0], &[1.0])], rho), Some(0.0));
        assert_relative_eq!(sigma_s(&[outcome(&[0.0], &[2.0])], rho).unwrap(), 0.5, epsilon = 1e-15);
        let two = [outcome(&[0.0], &[0.0]), outcome(&[0.0], &[4.0])];
        assert_relative_eq!(sigma_s(&two, rho).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(sigma_s(&[outcome(&[0.0, 3.0], &[0.0])], rho), None);
        let mixed = [outcome(&[0.0, 3.0], &[0.0]), outcome(&[0.0], &[2.0])];
        assert_relative_eq!(sigma_s(&mixed, rho).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn detection_examples() {
        let rho = 8.0;
        let t = rho / 8.0;
        let perfect = [outcome(&[0.0], &[0.0]), outcome(&[1.0, 5.0], &[1.0, 5.0])];
        assert_eq!(prob_detection(&perfect, t), 1.0);
        let half = [outcome(&[0.0], &[0.0]), outcome(&[0.0], &[rho / 4.0])];
        assert_eq!(prob_detection(&half, t), 0.5);
        assert_eq!(prob_detection(&[outcome(&[0.0], &[])], t), 0.0);
        assert_eq!(prob_detection(&[], t), 0.0);
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert_relative_eq!(lo, 0.403_831_4, epsilon = 1e-6);
        assert_relative_eq!(hi, 0.596_168_6, epsilon = 1e-6);
        let (lo, hi) = wilson_interval(0, 10, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.35);
        assert_eq!(wilson_interval(0, 0, Z_95), (0.0, 1.0));
    }

    #[test]
    fn zero_trials_and_determinism() {
        let g = ArrayGeometry::ku_band_simulation();
        let cells = [McCell {
            method: Method::Empast,
            snr_db: 15.0,
            alpha: Some(1.0),
            snapshots: 2,
            n_scatterers: ScattererCount::Two,
        }];
        let empty = run_monte_carlo(&cells, &g, &McConfig::new(0, 1)).unwrap();
        assert!(empty.is_empty());
        let mut buf = Vec::new();
        empty.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_HEADER);

        let cfg = McConfig::new(6, 42);
        let a = run_monte_carlo(&cells, &g, &cfg).unwrap();
        let b = run_monte_carlo(&cells, &g, &cfg).unwrap();
        assert_eq!(a, b);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.rows[0].trials, 6);
    }

    #[test]
    fn well_separated_pairs_respect_spacing() {
        let g = ArrayGeometry::ku_band_simulation();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = TrialSpec {
            snr_db: 10.0,
            n_scatterers: ScattererCount::Two,
            separation_m: None,
            snapshots: 1,
            method: Method::Empast,
            seed: 0,
            subset_m: 8,
            extent_m: 40.0,
            snr_convention: SnrConvention::default(),
        };
        for _ in 0..200 {
            let s = draw_elevations(&spec, &g, &mut rng);
            assert!(s[1] - s[0] > well_separated_spacing(&g, 40.0));
            assert!(s.iter().all(|v| v.abs() < 20.0));
        }
        let bad = TrialSpec {
            separation_m: Some(0.0),
            ..spec
        };
        assert!(bad.validate(&g).is_err());
    }
}
