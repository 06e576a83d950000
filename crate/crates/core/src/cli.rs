//! Command-line front end.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::atomic::{regularization, RegularizationInput};
use crate::config::Config;
use crate::error::{Result, TomoError};
use crate::eval::{run_monte_carlo, McCell, McConfig, McReport, ScattererCount};
use crate::linalg::{c, CMatrix};
use crate::method::{estimate, Method};
use crate::scene3d::{
    cloud_accuracy_completeness, extract_building_planes, plane_height_stats, reconstruct_cloud, synth_building_scene,
    PointCloud, ReconstructionSettings,
};
use crate::signal::{ArrayGeometry, Observation};

pub const THREADS_ENV: &str = "GRIDLESS_TOMO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gridless-tomo", version, about = "Gridless SAR tomography")]
pub struct Cli {
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
    Xyz,
    Ply,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the regularization weight and its p term.
    Tau,
    /// Estimate elevations from an observation CSV.
    Reconstruct {
        /// Rows are observed elements; columns are re_l,im_l pairs per snapshot.
        input: PathBuf,
    },
    /// Monte Carlo sweep over SNR, pair spacing or snapshot count.
    Montecarlo,
    /// Simulated building reconstruction with plane and cloud metrics.
    Scene3d,
    Version,
}

/// 2 config, 3 input data, 4 solver.
pub fn exit_code(err: &TomoError) -> i32 {
    match err {
        TomoError::Config(_) | TomoError::InvalidInput(_) | TomoError::OutsideWindow { .. } | TomoError::Aliasing { .. } => 2,
        TomoError::Data(_) | TomoError::Io(_) => 3,
        TomoError::Numerical(_) | TomoError::RankDeficient(_) => 4,
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> Result<()> {
    configure_threads(cli.threads)?;
    let (mut config, config_text) = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| TomoError::Config(format!("cannot read {}: {e}", p.display())))?;
            (Config::parse(&text)?, text)
        }
        None => (Config::default(), String::new()),
    };
    if let Some(s) = cli.seed {
        config.seed = Some(s);
    }
    let mut manifest = RunManifest::start(&config_text, config.seed());
    match &cli.command {
        Command::Version => {
            writeln!(stdout, "gridless-tomo {}", env!("CARGO_PKG_VERSION"))?;
            return Ok(());
        }
        Command::Tau => {
            manifest.command = "tau".into();
            cmd_tau(&config, stdout)?;
        }
        Command::Reconstruct { input } => {
            manifest.command = "reconstruct".into();
            manifest.input = Some(FileDigest::of(input)?);
            cmd_reconstruct(&config, input, &cli.out, &mut manifest)?;
        }
        Command::Montecarlo => {
            manifest.command = "montecarlo".into();
            cmd_montecarlo(&config, &cli.out, cli.format, &mut manifest)?;
        }
        Command::Scene3d => {
            manifest.command = "scene3d".into();
            cmd_scene3d(&config, &cli.out, cli.format, &mut manifest)?;
        }
    }
    manifest.write(&cli.out)
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| TomoError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        ),
        Err(_) => flag,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(TomoError::Config("thread count must be positive".into()));
        }
        // A pool can only be installed once per process; later calls keep the first.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex_digest(&bytes),
        })
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub input: Option<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    fn start(config_text: &str, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: String::new(),
            config_sha256: hex_digest(config_text.as_bytes()),
            seed,
            started_unix_s: unix_now(),
            finished_unix_s: 0,
            input: None,
            outputs: Vec::new(),
        }
    }

    /// Writes `bytes` under `dir` and records its digest.
    fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        self.outputs.push(FileDigest {
            path: name.to_string(),
            sha256: hex_digest(bytes),
        });
        Ok(())
    }

    fn write(&mut self, dir: &Path) -> Result<()> {
        self.finished_unix_s = unix_now();
        fs::create_dir_all(dir)?;
        let text = toml::to_string(self).map_err(|e| TomoError::Numerical(format!("manifest serialization: {e}")))?;
        let mut f = BufWriter::new(fs::File::create(dir.join("manifest.toml"))?);
        f.write_all(text.as_bytes())?;
        Ok(())
    }
}

/// Six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = 5 - x.abs().log10().floor() as i32;
    if (0..=15).contains(&digits) {
        format!("{:.*}", digits as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn cmd_tau<W: Write>(config: &Config, out: &mut W) -> Result<()> {
    let sigma = config.noise_sigma()?;
    let geometry = config.observed_geometry()?;
    let reg = regularization(&RegularizationInput::for_geometry(&geometry, sigma, config.snapshots()))?;
    writeln!(out, "tau = {}", sig6(reg.tau))?;
    writeln!(out, "p = {}", sig6(reg.p))?;
    Ok(())
}

/// Reads a complex matrix; line numbers in errors are 1-based and count the header.
pub fn parse_observation_csv(text: &str) -> Result<CMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| TomoError::Data("observation file is empty".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.is_empty() || cols.len() % 2 != 0 {
        return Err(TomoError::Data("line 1: header needs re_l,im_l column pairs".into()));
    }
    for (j, name) in cols.iter().enumerate() {
        let want = format!("{}_{}", if j % 2 == 0 { "re" } else { "im" }, j / 2 + 1);
        if *name != want {
            return Err(TomoError::Data(format!("line 1: expected column '{want}', found '{name}'")));
        }
    }
    let l = cols.len() / 2;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines {
        let values: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match values {
            Ok(v) if v.len() == 2 * l && v.iter().all(|x| x.is_finite()) => rows.push(v),
            Ok(v) if v.len() != 2 * l => {
                return Err(TomoError::Data(format!(
                    "line {}: expected {} values, found {}",
                    i + 1,
                    2 * l,
                    v.len()
                )))
            }
            _ => return Err(TomoError::Data(format!("line {}: malformed number", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(TomoError::Data("observation file has no data rows".into()));
    }
    Ok(CMatrix::from_fn(rows.len(), l, |r, s| c(rows[r][2 * s], rows[r][2 * s + 1])))
}

pub fn write_observation_csv<W: Write>(data: &CMatrix, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=data.ncols()).map(|l| format!("re_{l},im_{l}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for r in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols())
            .map(|s| format!("{:e},{:e}", data[(r, s)].re, data[(r, s)].im))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn cmd_reconstruct(config: &Config, input: &Path, out_dir: &Path, manifest: &mut RunManifest) -> Result<()> {
    let text = fs::read_to_string(input)?;
    let data = parse_observation_csv(&text)?;
    let geometry = config.observed_geometry()?;
    if data.nrows() != geometry.n_observed() {
        return Err(TomoError::Data(format!(
            "observation has {} rows but the geometry observes {} elements",
            data.nrows(),
            geometry.n_observed()
        )));
    }
    let method = config.method()?;
    let estimator = config.estimator(method);
    let needs_sigma = match method {
        Method::Gbcs => estimator.tau_l1.is_none(),
        _ => estimator.tau.is_none(),
    };
    let sigma = if needs_sigma { config.noise_sigma()? } else { config.noise.sigma.unwrap_or(0.0) };
    let mut data = data;
    if method == Method::Past && data.ncols() > 1 {
        data = data.columns(0, 1).into_owned();
    }
    let observation = Observation::from_data(data, sigma);
    let result = estimate(&observation, &geometry, &estimator)?;
    let mut csv = String::from("elevation_m,power\n");
    for (s, p) in result.elevations_m.iter().zip(&result.powers) {
        csv.push_str(&format!("{s:.9},{p:.9e}\n"));
    }
    manifest.emit(out_dir, "estimate.csv", csv.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sweep {
    Snr,
    Alpha,
    Snapshots,
}

impl Sweep {
    fn label(self) -> &'static str {
        match self {
            Sweep::Snr => "SNR (dB)",
            Sweep::Alpha => "alpha (Rayleigh units)",
            Sweep::Snapshots => "L",
        }
    }
}

/// Cells in method-major order together with each cell's sweep coordinate.
pub fn montecarlo_cells(config: &Config) -> Result<(Vec<McCell>, Vec<f64>)> {
    let mc = &config.montecarlo;
    let sweep = match mc.sweep.as_deref().unwrap_or("snr") {
        "snr" => Sweep::Snr,
        "alpha" => Sweep::Alpha,
        "L" | "l" => Sweep::Snapshots,
        other => {
            return Err(TomoError::Config(format!(
                "unknown montecarlo.sweep '{other}'; use snr, alpha or L"
            )))
        }
    };
    let values = mc.values.clone().ok_or_else(|| TomoError::Config("missing required key 'montecarlo.values'".into()))?;
    let methods = Config::methods(&mc.methods)?;
    let base_count = config.scatterer_count()?;
    let mut cells = Vec::new();
    let mut xs = Vec::new();
    for method in methods {
        for &v in &values {
            let mut cell = McCell {
                method,
                snr_db: mc.snr_db.unwrap_or(10.0),
                alpha: mc.alpha,
                snapshots: mc.snapshots.unwrap_or_else(|| config.snapshots()),
                n_scatterers: if mc.alpha.is_some() { ScattererCount::Two } else { base_count },
            };
            match sweep {
                Sweep::Snr => cell.snr_db = v,
                Sweep::Alpha => {
                    cell.alpha = Some(v);
                    cell.n_scatterers = ScattererCount::Two;
                }
                Sweep::Snapshots => {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(TomoError::Config(format!("snapshot count must be a positive integer, got {v}")));
                    }
                    cell.snapshots = v as usize;
                }
            }
            cells.push(cell);
            xs.push(v);
        }
    }
    Ok((cells, xs))
}

fn mc_config(config: &Config) -> Result<McConfig> {
    let mc = &config.montecarlo;
    let mut m = McConfig::new(mc.trials.unwrap_or(200), config.seed());
    if let Some(s) = mc.subset_size {
        m.subset_m = s;
    }
    m.extent_m = config.extent_m();
    m.threshold_m = mc.threshold_m;
    m.snr_convention = config.snr_convention()?;
    m.record_runtime = mc.record_runtime.unwrap_or(false);
    m.estimator = config.estimator(Method::Empast);
    Ok(m)
}

fn cmd_montecarlo(config: &Config, out_dir: &Path, format: Option<Format>, manifest: &mut RunManifest) -> Result<()> {
    let (cells, xs) = montecarlo_cells(config)?;
    let mc = mc_config(config)?;
    let geometry = config.full_geometry()?;
    let report = run_monte_carlo(&cells, &geometry, &mc)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    manifest.emit(out_dir, "montecarlo.csv", &csv)?;
    if format == Some(Format::Svg) {
        let sweep = match config.montecarlo.sweep.as_deref().unwrap_or("snr") {
            "alpha" => Sweep::Alpha,
            "L" | "l" => Sweep::Snapshots,
            _ => Sweep::Snr,
        };
        let (sigma, pd) = report_series(&report, &xs);
        manifest.emit(out_dir, "sigma_s.svg", svg_line_chart(&sigma, sweep.label(), "sigma_s / rho_s").as_bytes())?;
        manifest.emit(out_dir, "p_d.svg", svg_line_chart(&pd, sweep.label(), "P_D").as_bytes())?;
    }
    Ok(())
}

pub type Series = Vec<(String, Vec<(f64, f64)>)>;

fn report_series(report: &McReport, xs: &[f64]) -> (Series, Series) {
    let mut sigma: Series = Vec::new();
    let mut pd: Series = Vec::new();
    for (row, &x) in report.rows.iter().zip(xs) {
        let tag = row.method.tag().to_string();
        if sigma.last().map(|s| &s.0) != Some(&tag) {
            sigma.push((tag.clone(), Vec::new()));
            pd.push((tag, Vec::new()));
        }
        if let Some(s) = row.sigma_s {
            sigma.last_mut().unwrap().1.push((x, s));
        }
        pd.last_mut().unwrap().1.push((x, row.p_d));
    }
    (sigma, pd)
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal polyline chart, one line per series.
pub fn svg_line_chart(series: &Series, x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (480.0, 320.0, 50.0);
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    y0 = y0.min(0.0);
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" points=\"{m},{t} {m},{b} {r},{b}\"/>\n",
        t = m,
        b = h - m,
        r = w - m
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n",
        w / 2.0,
        h - 12.0
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{y_label}</text>\n",
        h / 2.0,
        h / 2.0
    ));
    for (v, x, y, anchor) in [
        (x0, px(x0), h - m + 16.0, "middle"),
        (x1, px(x1), h - m + 16.0, "middle"),
    ] {
        s.push_str(&format!("<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"10\" text-anchor=\"{anchor}\">{}</text>\n", sig6(v)));
    }
    for v in [y0, y1] {
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{}</text>\n",
            m - 4.0,
            py(v) + 3.0,
            sig6(v)
        ));
    }
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            w - m + 4.0,
            m + 14.0 * i as f64
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn cloud_bytes(cloud: &PointCloud, format: Format) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Ply => cloud.write_ply(&mut buf)?,
        _ => cloud.write_xyz(&mut buf)?,
    }
    Ok(buf)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "nan".into())
}

fn cmd_scene3d(config: &Config, out_dir: &Path, format: Option<Format>, manifest: &mut RunManifest) -> Result<()> {
    let format = match format {
        None | Some(Format::Xyz) => Format::Xyz,
        Some(Format::Ply) => Format::Ply,
        Some(f) => return Err(TomoError::Config(format!("scene3d writes xyz or ply clouds, not {f:?}"))),
    };
    let ext = if format == Format::Ply { "ply" } else { "xyz" };
    let s3 = &config.scene3d;
    let building = config.building();
    let (scene, truth) = synth_building_scene(&building)?;
    let geometry = config.observed_geometry()?;
    manifest.emit(out_dir, &format!("truth.{ext}"), &cloud_bytes(&truth, format)?)?;
    let methods = Config::methods(&s3.methods)?;
    let snrs = s3.snr_db.clone().unwrap_or_else(|| vec![0.0, 10.0, 20.0]);
    let ransac = config.ransac();
    let mut planes_csv = String::from("method,snr_db,ground_mu,ground_sigma,roof_mu,roof_sigma,wall_points,failures\n");
    let mut cloud_csv = String::from("method,snr_db,points,accuracy_mu,accuracy_sigma,completeness_mu,completeness_sigma\n");
    for method in methods {
        for &snr in &snrs {
            let settings = ReconstructionSettings {
                snr_db: snr,
                snapshots: s3.snapshots.unwrap_or_else(|| config.snapshots.unwrap_or(8)),
                seed: config.seed(),
                estimator: config.estimator(method),
            };
            let rec = reconstruct_cloud(&scene, &geometry, &settings)?;
            let tag = format!("{}_{snr}db", method.tag());
            manifest.emit(out_dir, &format!("recon_{tag}.{ext}"), &cloud_bytes(&rec.cloud, format)?)?;
            let planes = extract_building_planes(&rec.cloud, &ransac);
            let stats = |pts: &Option<Vec<_>>, h: f64| pts.as_deref().and_then(|p| plane_height_stats(p, h).ok());
            let ground = stats(&planes.ground, 0.0);
            let roof = if building.height_m > 0.0 { stats(&planes.roof, building.height_m) } else { None };
            planes_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                method.tag(),
                snr,
                fmt_opt(ground.map(|g| g.0)),
                fmt_opt(ground.map(|g| g.1)),
                fmt_opt(roof.map(|r| r.0)),
                fmt_opt(roof.map(|r| r.1)),
                planes.wall.as_ref().map_or(0, |w| w.len()),
                rec.failures.len()
            ));
            let metrics = cloud_accuracy_completeness(&rec.cloud, &truth).ok();
            cloud_csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                method.tag(),
                snr,
                rec.cloud.len(),
                fmt_opt(metrics.map(|m| m.accuracy_mu)),
                fmt_opt(metrics.map(|m| m.accuracy_sigma)),
                fmt_opt(metrics.map(|m| m.completeness_mu)),
                fmt_opt(metrics.map(|m| m.completeness_sigma)),
            ));
        }
    }
    manifest.emit(out_dir, "plane_metrics.csv", planes_csv.as_bytes())?;
    manifest.emit(out_dir, "cloud_metrics.csv", cloud_csv.as_bytes())
}

/// Noise-free observation of the configured scene, for fixtures.
pub fn clean_fixture(config: &Config) -> Result<(ArrayGeometry, CMatrix)> {
    let geometry = config.observed_geometry()?;
    let scene = config.scene()?;
    let data = crate::signal::clean_observation(&geometry, &scene)?;
    Ok((geometry, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(13.162339551232187), "13.1623");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(1.5e20), "1.50000e20");
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = CMatrix::from_fn(3, 2, |r, s| c(r as f64 + 0.5, -(s as f64)));
        let mut buf = Vec::new();
        write_observation_csv(&m, &mut buf).unwrap();
        let back = parse_observation_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = "re_1,im_1\n1,2\n3,x\n";
        let err = parse_observation_csv(bad).unwrap_err();
        assert!(matches!(&err, TomoError::Data(m) if m.contains("line 3")), "{err}");
        let short = "re_1,im_1\n1\n";
        assert!(parse_observation_csv(short).unwrap_err().to_string().contains("line 2"));
        assert!(parse_observation_csv("re_1,im_2\n1,2\n").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&TomoError::Config("x".into())), 2);
        assert_eq!(exit_code(&TomoError::Data("x".into())), 3);
        assert_eq!(exit_code(&TomoError::Numerical("x".into())), 4);
    }

    #[test]
    fn svg_is_well_formed() {
        let series: Series = vec![("empast".into(), vec![(0.0, 0.2), (10.0, 0.9)])];
        let svg = svg_line_chart(&series, "SNR", "P_D");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline") && svg.contains("empast"));
        let empty = svg_line_chart(&Vec::new(), "x", "y");
        assert!(empty.contains("</svg>"));
    }
}
