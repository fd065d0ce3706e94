//! Closed-form proximal quadratic solve.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, HermitianChol};

/// Exact minimizer of `0.5 x^H H x + Re(q^H x) + (zeta/2) ||x - a||^2`
/// for PSD curvature `H`, i.e. the solution of `(H + zeta I) x = zeta a - q`.
pub fn prox_quadratic_solve(h: &CMat, q: &CVec, anchor: &CVec, zeta: f64) -> Result<CVec> {
    let n = anchor.len();
    if h.nrows() != n || h.ncols() != n || q.len() != n {
        return Err(Error::Dimension(format!(
            "prox solve with H {}x{}, q {}, anchor {}",
            h.nrows(),
            h.ncols(),
            q.len(),
            n
        )));
    }
    if zeta <= 0.0 {
        return Err(Error::Precondition("penalty zeta must be > 0".into()));
    }
    let mut system = h.clone();
    for i in 0..n {
        system[(i, i)] += Complex64::new(zeta, 0.0);
    }
    let rhs = anchor * Complex64::new(zeta, 0.0) - q;
    let chol = HermitianChol::new(&system).ok_or_else(|| {
        Error::Numerical("proximal system is not positive definite".into())
    })?;
    let mut x = chol.solve(&rhs);

    // One refinement step keeps the residual at the contract level even for
    // ill-scaled curvature.
    let residual = &rhs - &system * &x;
    let rhs_scale = 1.0 + rhs.norm();
    if residual.norm() > 1e-12 * rhs_scale {
        x += chol.solve(&residual);
    }
    let residual = (&rhs - &system * &x).norm();
    if residual > 1e-10 * rhs_scale {
        return Err(Error::Numerical(format!(
            "proximal solve residual {residual:.3e} exceeds tolerance"
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitize;
    use crate::rng::{complex_gaussian, substream, StreamKind};

    #[test]
    fn zero_curvature_returns_anchor() {
        let h = CMat::zeros(3, 3);
        let q = CVec::zeros(3);
        let a = CVec::from_fn(3, |i, _| Complex64::new(i as f64, -1.0));
        let x = prox_quadratic_solve(&h, &q, &a, 2.5).unwrap();
        assert!((x - a).norm() < 1e-12);
    }

    #[test]
    fn scalar_case_matches_hand_computation() {
        // (2 + 1) x = 1 * 2  ->  x = 2/3
        let h = CMat::from_element(1, 1, Complex64::new(2.0, 0.0));
        let q = CVec::zeros(1);
        let a = CVec::from_element(1, Complex64::new(2.0, 0.0));
        let x = prox_quadratic_solve(&h, &q, &a, 1.0).unwrap();
        assert!((x[0].re - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn minimizer_beats_random_perturbations() {
        let mut rng = substream(5, StreamKind::Randomization, 0);
        let raw = CMat::from_fn(8, 8, |_, _| complex_gaussian(&mut rng));
        let h = &raw * raw.adjoint(); // PSD
        let h = hermitize(&h);
        let q = CVec::from_fn(8, |_, _| complex_gaussian(&mut rng));
        let a = CVec::from_fn(8, |_, _| complex_gaussian(&mut rng));
        let zeta = 0.7;
        let obj = |x: &CVec| -> f64 {
            0.5 * (x.adjoint() * &h * x)[(0, 0)].re
                + (q.adjoint() * x)[(0, 0)].re
                + 0.5 * zeta * (x - &a).norm_squared()
        };
        let x = prox_quadratic_solve(&h, &q, &a, zeta).unwrap();
        let base = obj(&x);
        for _ in 0..10_000 {
            let mut delta = CVec::from_fn(8, |_, _| complex_gaussian(&mut rng));
            delta *= Complex64::new(1e-3 / delta.norm(), 0.0);
            assert!(obj(&(&x + &delta)) >= base - 1e-12);
        }
    }

    #[test]
    fn limits_in_zeta_reach_anchor_and_unconstrained_minimizer() {
        let mut rng = substream(6, StreamKind::Randomization, 0);
        let raw = CMat::from_fn(4, 4, |_, _| complex_gaussian(&mut rng));
        let h = hermitize(&(&raw * raw.adjoint())) + CMat::identity(4, 4);
        let q = CVec::from_fn(4, |_, _| complex_gaussian(&mut rng));
        let a = CVec::from_fn(4, |_, _| complex_gaussian(&mut rng));

        let x_hi = prox_quadratic_solve(&h, &q, &a, 1e6).unwrap();
        assert!((&x_hi - &a).norm() < 1e-4);

        let x_lo = prox_quadratic_solve(&h, &q, &a, 1e-6).unwrap();
        let unconstrained = HermitianChol::new(&h).unwrap().solve(&(-&q));
        assert!((&x_lo - &unconstrained).norm() < 1e-4);
    }
}
