//! Small helpers over `nalgebra` complex matrices shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Largest elementwise deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Errors unless `a` is square and Hermitian within `tol` (absolute).
pub fn require_hermitian(a: &CMat, tol: f64) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let defect = hermitian_defect(a);
    if defect > tol {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Symmetric part `(A + A^H)/2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Real part of the quadratic form `x^H A x` (real for Hermitian `A`).
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    (x.adjoint() * a * x)[(0, 0)].re
}

/// `Re tr(A B)`.
pub fn real_trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let p = a[(i, k)] * b[(k, i)];
            acc += p.re;
        }
    }
    acc
}

/// Outer product `x y^H`.
pub fn outer(x: &CVec, y: &CVec) -> CMat {
    x * y.adjoint()
}

/// `L L^H` factorization of a Hermitian positive-definite matrix.
///
/// `nalgebra`'s `Cholesky` cannot serve as a definiteness test for complex
/// matrices (the complex square root of a negative pivot succeeds silently),
/// so the cone membership tests and solves go through this factorization,
/// which rejects non-positive pivots.
#[derive(Debug, Clone)]
pub struct HermitianChol {
    l: CMat,
}

impl HermitianChol {
    /// Factor `a`; `None` when a pivot is not strictly positive.
    pub fn new(a: &CMat) -> Option<HermitianChol> {
        let n = a.nrows();
        if a.ncols() != n {
            return None;
        }
        let mut l = CMat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in (j + 1)..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = v / djj;
            }
        }
        Some(HermitianChol { l })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &CVec) -> CVec {
        let n = self.l.nrows();
        let mut y = b.clone();
        // forward: L y = b
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.l[(i, k)] * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)].conj() * y[k];
            }
            y[i] = v / self.l[(i, i)];
        }
        y
    }

    /// Dense inverse `A^{-1}`.
    pub fn inverse(&self) -> CMat {
        let n = self.l.nrows();
        let mut out = CMat::zeros(n, n);
        for j in 0..n {
            let e = CVec::from_fn(n, |i, _| {
                if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let col = self.solve(&e);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        hermitize(&out)
    }
}

/// Positive-definiteness test for a Hermitian matrix.
pub fn is_positive_definite(a: &CMat) -> bool {
    a.nrows() == 0 || HermitianChol::new(a).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_form_matches_manual_expansion() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, 1.0),
                Complex64::new(0.5, -1.0),
                Complex64::new(3.0, 0.0),
            ],
        );
        let x = CVec::from_vec(vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, 2.0)]);
        let direct = (x.adjoint() * &a * &x)[(0, 0)];
        assert!((quad_form(&a, &x) - direct.re).abs() < 1e-14);
        assert!(direct.im.abs() < 1e-14);
    }

    #[test]
    fn hermitian_defect_detects_asymmetry() {
        let mut a = CMat::identity(3, 3);
        assert_eq!(hermitian_defect(&a), 0.0);
        a[(0, 1)] = Complex64::new(0.0, 1.0);
        assert!(hermitian_defect(&a) > 0.9);
        assert!(require_hermitian(&a, 1e-10).is_err());
    }

    #[test]
    fn hermitian_chol_rejects_indefinite_and_solves_pd() {
        // indefinite with complex off-diagonal: must be rejected
        let mut s = CMat::zeros(2, 2);
        s[(0, 0)] = Complex64::new(0.1, 0.0);
        s[(1, 1)] = Complex64::new(0.1, 0.0);
        s[(0, 1)] = Complex64::new(0.0, 2.0);
        s[(1, 0)] = Complex64::new(0.0, -2.0);
        assert!(HermitianChol::new(&s).is_none());
        assert!(!is_positive_definite(&s));

        // PD: A = B B^H + I, solve and invert
        let b = CMat::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64 * 0.3, j as f64 * 0.1));
        let a = hermitize(&(&b * b.adjoint())) + CMat::identity(3, 3);
        let chol = HermitianChol::new(&a).unwrap();
        let rhs = CVec::from_fn(3, |i, _| Complex64::new(1.0, i as f64));
        let x = chol.solve(&rhs);
        assert!((&a * &x - &rhs).norm() < 1e-12 * rhs.norm());
        let inv = chol.inverse();
        assert!((&a * &inv - CMat::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn real_trace_product_agrees_with_trace() {
        let a = CMat::from_fn(3, 3, |i, j| Complex64::new((i + j) as f64, i as f64 - j as f64));
        let b = CMat::from_fn(3, 3, |i, j| Complex64::new(1.0 + j as f64, i as f64));
        let direct = (&a * &b).trace().re;
        assert!((real_trace_product(&a, &b) - direct).abs() < 1e-12);
    }
}
