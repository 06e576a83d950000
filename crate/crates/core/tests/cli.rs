use std::fs;
use std::path::Path;

use clap::Parser;
use gridless_tomo::cli::{clean_fixture, main_with_args, run, write_observation_csv, Cli};
use gridless_tomo::config::Config;
use gridless_tomo::error::TomoError;
use gridless_tomo::linalg::CMatrix;

fn run_cmd(args: &[&str]) -> (Result<(), TomoError>, String) {
    let mut argv = vec!["gridless-tomo"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from(argv).unwrap();
    let mut out = Vec::new();
    let r = run(&cli, &mut out);
    (r, String::from_utf8(out).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn manifest_digests(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("manifest.toml")).unwrap();
    text.lines().filter(|l| l.starts_with("sha256")).map(String::from).collect()
}

#[test]
fn tau_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write(tmp.path(), "c.toml", "noise.sigma = 1.0\ngeometry.observed_indices = [0,1,2,3,4,5,6,7]\n");
    let (r, stdout) = run_cmd(&["tau", "--config", &cfg, "--out", out.to_str().unwrap()]);
    r.unwrap();
    assert!(stdout.contains("tau = 13.1623"), "{stdout}");
    assert!(out.join("manifest.toml").exists());

    let cfg0 = write(tmp.path(), "z.toml", "noise.sigma = 0.0\n");
    let (r, stdout) = run_cmd(&["tau", "--config", &cfg0, "--out", out.to_str().unwrap()]);
    r.unwrap();
    assert!(stdout.starts_with("tau = 0\n"), "{stdout}");

    let missing = write(tmp.path(), "m.toml", "geometry.n_full = 12\n");
    let (r, _) = run_cmd(&["tau", "--config", &missing, "--out", out.to_str().unwrap()]);
    let err = r.unwrap_err();
    assert!(err.to_string().contains("noise.sigma"));
    assert_eq!(main_with_args(["gridless-tomo", "tau", "--config", &missing, "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn reconstruct_command() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg_text = "seed = 4\nsnapshots = 2\nsolver.tau = 1e-3\n[[scene.scatterers]]\nelevation_m = 3.3\n";
    let cfg = write(tmp.path(), "c.toml", cfg_text);
    let (geometry, data) = clean_fixture(&Config::parse(cfg_text).unwrap()).unwrap();
    let mut buf = Vec::new();
    write_observation_csv(&data, &mut buf).unwrap();
    let obs = write(tmp.path(), "obs.csv", std::str::from_utf8(&buf).unwrap());
    let (r, _) = run_cmd(&["reconstruct", &obs, "--config", &cfg, "--out", out.to_str().unwrap()]);
    r.unwrap();
    let est = fs::read_to_string(out.join("estimate.csv")).unwrap();
    let rows: Vec<&str> = est.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "{est}");
    let s: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert!((s - 3.3).abs() < 1e-3 * geometry.rayleigh_resolution_m(), "{s}");

    let mut zeros = Vec::new();
    write_observation_csv(&CMatrix::zeros(12, 2), &mut zeros).unwrap();
    let zobs = write(tmp.path(), "zero.csv", std::str::from_utf8(&zeros).unwrap());
    let (r, _) = run_cmd(&["reconstruct", &zobs, "--config", &cfg, "--out", out.to_str().unwrap()]);
    r.unwrap();
    assert_eq!(fs::read_to_string(out.join("estimate.csv")).unwrap(), "elevation_m,power\n");

    let bad = write(tmp.path(), "bad.csv", "re_1,im_1\n1,0\n1,zz\n");
    let (r, _) = run_cmd(&["reconstruct", &bad, "--config", &cfg, "--out", out.to_str().unwrap()]);
    let err = r.unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    assert_eq!(
        main_with_args(["gridless-tomo", "reconstruct", &bad, "--config", &cfg, "--out", out.to_str().unwrap()]),
        3
    );

    let short = write(tmp.path(), "short.csv", "re_1,im_1\n1,0\n");
    let (r, _) = run_cmd(&["reconstruct", &short, "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(matches!(r, Err(TomoError::Data(_))));
}

#[test]
fn montecarlo_command() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = write(tmp.path(), "e.toml", "montecarlo.values = [0, 10]\nmontecarlo.trials = 0\n");
    let out0 = tmp.path().join("o0");
    run_cmd(&["montecarlo", "--config", &empty, "--out", out0.to_str().unwrap()]).0.unwrap();
    assert_eq!(
        fs::read_to_string(out0.join("montecarlo.csv")).unwrap(),
        "method,snr_db,alpha,L,trials,sigma_s,p_d,p_d_ci_lo,p_d_ci_hi,mean_runtime_ms\n"
    );

    let bad = write(tmp.path(), "b.toml", "montecarlo.values = [0]\nmontecarlo.methods = [\"omp\"]\n");
    let err = run_cmd(&["montecarlo", "--config", &bad, "--out", out0.to_str().unwrap()]).0.unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("empast") && msg.contains("past") && msg.contains("gbcs"), "{msg}");

    let cfg = write(
        tmp.path(),
        "c.toml",
        "seed = 11\nsnapshots = 4\nmontecarlo.sweep = \"alpha\"\nmontecarlo.values = [0.8, 1.5]\nmontecarlo.trials = 3\nmontecarlo.methods = [\"empast\", \"gbcs\"]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_cmd(&["montecarlo", "--config", &cfg, "--out", dir.to_str().unwrap(), "--format", "svg"]).0.unwrap();
    }
    assert_eq!(manifest_digests(&a), manifest_digests(&b));
    assert_eq!(manifest_digests(&a).len(), 3);
    let csv = fs::read_to_string(a.join("montecarlo.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(fs::read_to_string(a.join("p_d.svg")).unwrap().contains("<polyline"));
}

#[test]
fn scene3d_command() {
    let tmp = tempfile::tempdir().unwrap();
    let flat = write(
        tmp.path(),
        "flat.toml",
        "seed = 2\nscene3d.height_m = 0.0\nscene3d.azimuth_pixels = 2\nscene3d.range_pixels = 20\nscene3d.snr_db = [20.0]\n",
    );
    let out = tmp.path().join("flat");
    run_cmd(&["scene3d", "--config", &flat, "--out", out.to_str().unwrap()]).0.unwrap();
    let truth = fs::read_to_string(out.join("truth.xyz")).unwrap();
    assert!(truth.lines().all(|l| l.split_whitespace().nth(2).unwrap().parse::<f64>().unwrap() == 0.0));
    let planes = fs::read_to_string(out.join("plane_metrics.csv")).unwrap();
    let row: Vec<&str> = planes.lines().nth(1).unwrap().split(',').collect();
    assert_ne!(row[2], "nan");
    assert_eq!(row[4], "nan");

    let cfg = write(
        tmp.path(),
        "b.toml",
        "seed = 3\nscene3d.azimuth_pixels = 6\nscene3d.building_x_m = [-1.0, 10.0]\nscene3d.snr_db = [20.0]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_cmd(&["scene3d", "--config", &cfg, "--out", dir.to_str().unwrap(), "--format", "ply"]).0.unwrap();
    }
    assert_eq!(manifest_digests(&a), manifest_digests(&b));
    assert!(fs::read_to_string(a.join("truth.ply")).unwrap().starts_with("ply\n"));
    let planes = fs::read_to_string(a.join("plane_metrics.csv")).unwrap();
    let row: Vec<&str> = planes.lines().nth(1).unwrap().split(',').collect();
    let roof_mu: f64 = row[4].parse().unwrap();
    assert!(roof_mu <= 0.2, "{planes}");
}

#[test]
fn version_and_bad_args() {
    assert_eq!(main_with_args(["gridless-tomo", "version"]), 0);
    assert_eq!(main_with_args(["gridless-tomo", "frobnicate"]), 2);
    assert_eq!(main_with_args(["gridless-tomo", "tau", "--format", "pdf"]), 2);
}
