//! Small dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, TomoError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// `(H + H^H) / 2`.
pub fn hermitian_part(h: &CMatrix) -> CMatrix {
    let mut out = h.clone();
    let n = h.nrows();
    for i in 0..n {
        out[(i, i)] = c(h[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Largest entrywise deviation from Hermitian symmetry, relative to the largest entry.
pub fn hermitian_defect(h: &CMatrix) -> f64 {
    let scale = h.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let n = h.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(h: &CMatrix) -> Result<HermitianEigen> {
    if h.nrows() != h.ncols() {
        return Err(TomoError::invalid("eigen-decomposition needs a square matrix"));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(TomoError::Numerical(
            "non-finite entry in Hermitian eigen-decomposition".into(),
        ));
    }
    let eig = hermitian_part(h).symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Real symmetric positive-definite solve via Cholesky, falling back to LU.
pub fn solve_real(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

/// Roots of the polynomial `sum_k coeffs[k] z^k` by Aberth–Ehrlich simultaneous iteration.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1].norm() == 0.0 {
        hi -= 1;
    }
    if hi == 0 {
        return Err(TomoError::Numerical("zero polynomial has no isolated roots".into()));
    }
    let degree = hi - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs[..=degree].iter().map(|&a| a / lead).collect();

    // Initial guesses on a circle of the Cauchy-bound-ish radius, offset to break symmetry.
    let radius = monic[..degree]
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm().powf(1.0 / (degree - k) as f64))
        .fold(0.0_f64, f64::max)
        .max(1e-3);
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|k| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / degree as f64 + 0.4))
        .collect();

    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut p = monic[degree];
        let mut dp = c(0.0, 0.0);
        for k in (0..degree).rev() {
            dp = dp * z + p;
            p = p * z + monic[k];
        }
        (p, dp)
    };

    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..degree {
            let z = roots[i];
            let (p, dp) = eval(z);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulsion = c(0.0, 0.0);
            for (j, &w) in roots.iter().enumerate() {
                if j != i {
                    let d = z - w;
                    if d.norm() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let step = ratio / (c(1.0, 0.0) - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                roots[i] = z - step;
                max_step = max_step.max(step.norm() / z.norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            return Ok(roots);
        }
    }
    if roots.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        // Slow convergence on clustered roots still leaves usable estimates.
        return Ok(roots);
    }
    Err(TomoError::Numerical("polynomial root iteration diverged".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        // (z - 1)(z - 2i) = z^2 - (1 + 2i) z + 2i
        let roots = polynomial_roots(&[c(0.0, 2.0), c(-1.0, -2.0), c(1.0, 0.0)]).unwrap();
        let mut found = [false, false];
        for r in roots {
            if (r - c(1.0, 0.0)).norm() < 1e-10 {
                found[0] = true;
            }
            if (r - c(0.0, 2.0)).norm() < 1e-10 {
                found[1] = true;
            }
        }
        assert_eq!(found, [true, true]);
    }

    #[test]
    fn unit_circle_roots_of_high_degree() {
        // z^12 - 1
        let mut coeffs = vec![c(0.0, 0.0); 13];
        coeffs[0] = c(-1.0, 0.0);
        coeffs[12] = c(1.0, 0.0);
        let roots = polynomial_roots(&coeffs).unwrap();
        assert_eq!(roots.len(), 12);
        for r in roots {
            assert!((r.norm() - 1.0).abs() < 1e-9);
            assert!((r.powi(12) - c(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(-1.0, 0.0)],
        );
        let e = hermitian_eigen(&h).unwrap();
        assert!(e.values[0] <= e.values[1]);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            2,
            e.values.iter().map(|&v| c(v, 0.0)),
        ));
        let back = &e.vectors * d * e.vectors.adjoint();
        assert!((back - h).norm() < 1e-12);
    }
}
