mod common;

use common::{admm_objective, oracle_objective, tiny_case, TinySdp};
use gridless_tomo::atomic::{regularization, RegularizationInput};
use gridless_tomo::linalg::CMatrix;

#[test]
fn oracle_trivial_cases() {
    // Zero data: the optimum is G = 0, V = 0, u = 0.
    let zero_data = TinySdp {
        n: 3,
        l: 1,
        observed: vec![0, 2],
        y: CMatrix::zeros(2, 1),
        tau: 1.0,
    };
    assert!(zero_data.solve().abs() < 1e-8);
}

#[test]
fn admm_matches_oracle_on_tiny_instances() {
    for seed in 0..5 {
        let case = tiny_case(seed);
        let (a, o) = (admm_objective(&case), oracle_objective(&case));
        assert!((a - o).abs() <= 5e-3 * o.abs().max(1e-12), "seed {seed}: admm {a} oracle {o}");
    }
}

#[test]
fn tau_matches_high_precision_table() {
    let table = include_str!("data/tau_reference.csv");
    for line in table.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let r = regularization(&RegularizationInput {
            noise_variance: f[0],
            n_observed: f[1] as usize,
            n_full: f[2] as usize,
            snapshots: f[3] as usize,
        })
        .unwrap();
        assert!((r.tau - f[4]).abs() <= 1e-12 * f[4], "{line}: {}", r.tau);
        assert!((r.p - f[5]).abs() <= 1e-12 * f[5], "{line}: {}", r.p);
    }
}
