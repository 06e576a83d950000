//! Test-only reference implementations.
#![allow(dead_code)]

use gridless_tomo::admm::{objective_value, solve_empast, SolverConfig};
use gridless_tomo::atomic::{regularization, RegularizationInput};
use gridless_tomo::signal::{simulate_observation, ArrayGeometry, Observation, Scene};
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type CMat = DMatrix<Complex64>;

/// Problem data for `min ½‖Y − G_Ω‖² + τ/2·(tr V + u₀)` s.t. `[[T(u), G], [G^H, V]] ⪰ 0`.
pub struct TinySdp {
    pub n: usize,
    pub l: usize,
    pub observed: Vec<usize>,
    /// `M × L`.
    pub y: CMat,
    pub tau: f64,
}

enum Var {
    U0,
    URe(usize),
    UIm(usize),
    GRe(usize, usize),
    GIm(usize, usize),
    VDiag(usize),
    VRe(usize, usize),
    VIm(usize, usize),
}

struct Layout {
    vars: Vec<Var>,
    basis: Vec<CMat>,
}

impl TinySdp {
    fn layout(&self) -> Layout {
        let (n, l) = (self.n, self.l);
        let size = n + l;
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut vars = vec![Var::U0];
        for k in 1..n {
            vars.push(Var::URe(k));
            vars.push(Var::UIm(k));
        }
        for r in 0..n {
            for c in 0..l {
                vars.push(Var::GRe(r, c));
                vars.push(Var::GIm(r, c));
            }
        }
        for a in 0..l {
            vars.push(Var::VDiag(a));
            for b in a + 1..l {
                vars.push(Var::VRe(a, b));
                vars.push(Var::VIm(a, b));
            }
        }
        let basis = vars
            .iter()
            .map(|v| {
                let mut m = CMat::zeros(size, size);
                let mut put = |r: usize, c: usize, z: Complex64| {
                    m[(r, c)] += z;
                    if r != c {
                        m[(c, r)] += z.conj();
                    }
                };
                match *v {
                    Var::U0 => (0..n).for_each(|d| put(d, d, one)),
                    Var::URe(k) => (0..n - k).for_each(|d| put(d, d + k, one)),
                    Var::UIm(k) => (0..n - k).for_each(|d| put(d, d + k, i)),
                    Var::GRe(r, c) => put(r, n + c, one),
                    Var::GIm(r, c) => put(r, n + c, i),
                    Var::VDiag(a) => put(n + a, n + a, one),
                    Var::VRe(a, b) => put(n + a, n + b, one),
                    Var::VIm(a, b) => put(n + a, n + b, i),
                }
                m
            })
            .collect();
        Layout { vars, basis }
    }

    fn observed_row(&self, r: usize) -> Option<usize> {
        self.observed.iter().position(|&o| o == r)
    }

    fn f(&self, layout: &Layout, x: &DVector<f64>) -> f64 {
        let mut val = 0.0;
        let mut g = vec![Complex64::new(0.0, 0.0); self.n * self.l];
        for (k, v) in layout.vars.iter().enumerate() {
            match *v {
                Var::U0 | Var::VDiag(_) => val += 0.5 * self.tau * x[k],
                Var::GRe(r, c) => g[r * self.l + c].re = x[k],
                Var::GIm(r, c) => g[r * self.l + c].im = x[k],
                _ => {}
            }
        }
        for r in 0..self.n {
            if let Some(m) = self.observed_row(r) {
                for c in 0..self.l {
                    val += 0.5 * (g[r * self.l + c] - self.y[(m, c)]).norm_sqr();
                }
            }
        }
        val
    }

    fn grad_hess_f(&self, layout: &Layout, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let d = x.len();
        let mut grad = DVector::zeros(d);
        let mut hdiag = DVector::zeros(d);
        for (k, v) in layout.vars.iter().enumerate() {
            match *v {
                Var::U0 | Var::VDiag(_) => grad[k] = 0.5 * self.tau,
                Var::GRe(r, c) => {
                    if let Some(m) = self.observed_row(r) {
                        grad[k] = x[k] - self.y[(m, c)].re;
                        hdiag[k] = 1.0;
                    }
                }
                Var::GIm(r, c) => {
                    if let Some(m) = self.observed_row(r) {
                        grad[k] = x[k] - self.y[(m, c)].im;
                        hdiag[k] = 1.0;
                    }
                }
                _ => {}
            }
        }
        (grad, hdiag)
    }

    fn block(layout: &Layout, x: &DVector<f64>) -> CMat {
        let size = layout.basis[0].nrows();
        let mut z = CMat::zeros(size, size);
        for (k, a) in layout.basis.iter().enumerate() {
            z += a * Complex64::new(x[k], 0.0);
        }
        z
    }

    /// `None` outside the PD cone. Complex Cholesky never fails, so the real embedding
    /// `[[A, −B], [B, A]]` is factored instead; its log-det is twice that of `Z`.
    fn log_det(z: &CMat) -> Option<f64> {
        let k = z.nrows();
        let real = DMatrix::<f64>::from_fn(2 * k, 2 * k, |i, j| {
            let v = z[(i % k, j % k)];
            match (i < k, j < k) {
                (true, true) | (false, false) => v.re,
                (true, false) => -v.im,
                (false, true) => v.im,
            }
        });
        let ch = Cholesky::new(real)?;
        Some(ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    /// Barrier method; returns the optimal objective to within `m/t ≤ 1e-8·(1 + f)`.
    pub fn solve(&self) -> f64 {
        let layout = self.layout();
        let d = layout.vars.len();
        let size = (self.n + self.l) as f64;
        let scale = 1.0 + self.y.iter().map(|z| z.norm()).sum::<f64>();
        let mut x = DVector::zeros(d);
        for (k, v) in layout.vars.iter().enumerate() {
            if matches!(v, Var::U0 | Var::VDiag(_)) {
                x[k] = scale;
            }
        }
        let mut t = 1.0;
        loop {
            for _ in 0..200 {
                let z = Self::block(&layout, &x);
                let zinv = z.clone().try_inverse().expect("barrier iterate left the cone");
                let (gf, hf) = self.grad_hess_f(&layout, &x);
                let za: Vec<CMat> = layout.basis.iter().map(|a| &zinv * a).collect();
                let mut grad = gf * t;
                let mut hess = DMatrix::<f64>::from_diagonal(&(hf * t));
                for i in 0..d {
                    grad[i] -= za[i].trace().re;
                    for j in i..d {
                        let h = (&za[i] * &za[j]).trace().re;
                        hess[(i, j)] += h;
                        if i != j {
                            hess[(j, i)] += h;
                        }
                    }
                }
                let ridge = 1e-12 * hess.diagonal().max();
                let ch = Cholesky::new(hess.clone())
                    .or_else(|| Cholesky::new(hess + DMatrix::<f64>::identity(d, d) * ridge));
                let Some(ch) = ch else { break };
                let step = ch.solve(&(-&grad));
                let decrement = -grad.dot(&step);
                if decrement / 2.0 < 1e-12 {
                    break;
                }
                let phi = |x: &DVector<f64>| -> Option<f64> {
                    let ld = Self::log_det(&Self::block(&layout, x))?;
                    Some(t * self.f(&layout, x) - ld)
                };
                let phi0 = phi(&x).unwrap();
                let mut s = 1.0;
                loop {
                    let cand = &x + &step * s;
                    if let Some(p) = phi(&cand) {
                        if p <= phi0 - 0.25 * s * decrement {
                            x = cand;
                            break;
                        }
                    }
                    s *= 0.5;
                    if s < 1e-14 {
                        break;
                    }
                }
                if s < 1e-14 {
                    break;
                }
            }
            let fx = self.f(&layout, &x);
            if size / t < 1e-8 * (1.0 + fx.abs()) {
                return fx;
            }
            t *= 10.0;
        }
    }
}

pub struct TinyCase {
    pub geometry: ArrayGeometry,
    pub observation: Observation,
    pub tau: f64,
}

/// N ≤ 4, L ≤ 2, M ≤ 3 with the Ku-band wavelength and range.
pub fn tiny_case(seed: u64) -> TinyCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4usize);
    let l = rng.random_range(1..=2usize);
    let m = rng.random_range(1..=n.min(3));
    let base = ArrayGeometry::ku_band_simulation();
    let full = ArrayGeometry::from_aperture(base.wavelength_m(), base.reference_range_m(), n, base.aperture_m()).unwrap();
    let geometry = full.with_random_subset(m, &mut rng).unwrap();
    let window = geometry.unambiguous_window_m();
    let k = rng.random_range(1..=2usize);
    let elev: Vec<f64> = (0..k).map(|_| rng.random_range(-0.4..0.4) * window).collect();
    let scene = Scene::random_phase(0.9 * window, l, &elev, 1.0, &mut rng).unwrap();
    let sigma = rng.random_range(0.01..0.5);
    let observation = simulate_observation(&geometry, &scene, sigma, seed).unwrap();
    let tau = regularization(&RegularizationInput::for_geometry(&geometry, sigma, l))
        .unwrap()
        .tau
        * rng.random_range(0.05..1.0);
    TinyCase {
        geometry,
        observation,
        tau,
    }
}

pub fn oracle_objective(case: &TinyCase) -> f64 {
    TinySdp {
        n: case.geometry.n_full(),
        l: case.observation.snapshots(),
        observed: case.geometry.observed_indices().to_vec(),
        y: case.observation.data.clone(),
        tau: case.tau,
    }
    .solve()
}

pub fn admm_objective(case: &TinyCase) -> f64 {
    let cfg = SolverConfig {
        max_iters: 200_000,
        tol_primal: 1e-10,
        tol_change: 1e-13,
        ..SolverConfig::new(case.tau)
    };
    let state = solve_empast(&case.observation, &case.geometry, &cfg).unwrap();
    objective_value(&state, &case.observation, &case.geometry, case.tau)
}

/// All-pairs nearest distances.
pub fn brute_nearest(query: &[[f64; 3]], reference: &[[f64; 3]]) -> Vec<f64> {
    query
        .iter()
        .map(|q| {
            reference
                .iter()
                .map(|r| ((q[0] - r[0]).powi(2) + (q[1] - r[1]).powi(2) + (q[2] - r[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
