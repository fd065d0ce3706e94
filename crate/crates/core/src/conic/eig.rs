//! Hermitian eigendecomposition by cyclic Jacobi rotations.
//!
//! Matrices here are small (a few dozen rows at most), where Jacobi is
//! simple, unconditionally stable and gives orthonormal eigenvectors to
//! machine precision. Eigenvalues are returned sorted descending.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, hermitize, CMat, CVec};

#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues sorted descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values` order.
    pub vectors: CMat,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Columns whose eigenvalue is within a relative tolerance of the top one.
    pub fn top_eigenspace_columns(&self, rel_tol: f64) -> Vec<usize> {
        let top = self.values[0];
        let cut = top - rel_tol * top.abs().max(1.0);
        (0..self.values.len())
            .filter(|&i| self.values[i] >= cut)
            .collect()
    }
}

/// Eigendecomposition `A = V diag(values) V^H` of a Hermitian matrix.
///
/// Rejects inputs whose Hermitian defect exceeds `1e-10 * max(1, |A|_max)`.
pub fn hermitian_eig(a: &CMat) -> Result<HermitianEig> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let defect = hermitian_defect(a);
    if defect > 1e-10 * scale.max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    if n == 0 {
        return Ok(HermitianEig {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }

    let mut m = hermitize(a);
    let mut v = CMat::identity(n, n);
    let frob = m.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * frob;

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let phase = apq / r; // e^{i phi}
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // J = I except J[p][p]=c, J[p][q]=s, J[q][p]=-s*conj(phase),
                // J[q][q]=c*conj(phase); annihilates the (p,q) entry.
                let jqp = -Complex64::new(s, 0.0) * phase.conj();
                let jqq = Complex64::new(c, 0.0) * phase.conj();

                // m <- m J (columns p, q)
                for i in 0..n {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = mip * c + miq * jqp;
                    m[(i, q)] = mip * s + miq * jqq;
                }
                // m <- J^H m (rows p, q)
                for j in 0..n {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = mpj * c + mqj * jqp.conj();
                    m[(q, j)] = mpj * s + mqj * jqq.conj();
                }
                // exact real diagonal, exact zero at the target
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);

                // v <- v J
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c + viq * jqp;
                    v[(i, q)] = vip * s + viq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite eigenvalues"));

    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<Complex64> = (0..n).map(|i| v[(i, src)]).collect();
        canonical_phase(&mut col);
        for i in 0..n {
            vectors[(i, dst)] = col[i];
        }
    }
    Ok(HermitianEig { values, vectors })
}

/// Rotate a vector's global phase so its first significant entry is
/// real-positive; keeps eigenvector output reproducible.
fn canonical_phase(col: &mut [Complex64]) {
    let maxmod = col.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if maxmod == 0.0 {
        return;
    }
    let lead = col.iter().find(|z| z.norm() > 1e-12 * maxmod);
    if let Some(&z) = lead {
        let rot = z.conj() / z.norm();
        for entry in col.iter_mut() {
            *entry *= rot;
        }
    }
}

/// Eigenvector of the largest eigenvalue with the deterministic tie-break:
/// among the eigenvectors attaining the top eigenvalue (within relative
/// 1e-9), pick the one with the lexicographically largest |entries|, first
/// entry first, and make its leading entry real-positive.
pub fn principal_eigenvector(eig: &HermitianEig) -> CVec {
    let candidates = eig.top_eigenspace_columns(1e-9);
    let n = eig.dim();
    let mut best = candidates[0];
    for &c in candidates.iter().skip(1) {
        for i in 0..n {
            let a = eig.vectors[(i, c)].norm();
            let b = eig.vectors[(i, best)].norm();
            if (a - b).abs() > 1e-12 {
                if a > b {
                    best = c;
                }
                break;
            }
        }
    }
    CVec::from_fn(n, |i, _| eig.vectors[(i, best)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::outer;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::Rng;

    fn reconstruct(eig: &HermitianEig) -> CMat {
        let n = eig.dim();
        let mut acc = CMat::zeros(n, n);
        for j in 0..n {
            let col = CVec::from_fn(n, |i, _| eig.vectors[(i, j)]);
            acc += outer(&col, &col) * Complex64::new(eig.values[j], 0.0);
        }
        acc
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMat {
        let raw = CMat::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        hermitize(&raw)
    }

    #[test]
    fn diagonal_matrix_eigenvalues_sorted_descending() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let eig = hermitian_eig(&a).unwrap();
        assert_eq!(eig.values, vec![3.0, 2.0, 1.0]);
        // eigenvectors are a permutation of the canonical basis
        for j in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| eig.vectors[(i, j)].norm()).collect();
            let ones = col.iter().filter(|&&x| (x - 1.0).abs() < 1e-12).count();
            let zeros = col.iter().filter(|&&x| x.abs() < 1e-12).count();
            assert_eq!((ones, zeros), (1, 2));
        }
    }

    #[test]
    fn identity_keeps_unit_eigenvalues() {
        let eig = hermitian_eig(&CMat::identity(4, 4)).unwrap();
        for v in &eig.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let vtv = eig.vectors.adjoint() * &eig.vectors;
        assert!((vtv - CMat::identity(4, 4)).norm() < 1e-10);
        // tie-break lands on the first canonical basis vector
        let p = principal_eigenvector(&eig);
        assert!((p[0].re - 1.0).abs() < 1e-12 && p[0].im.abs() < 1e-12);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut rng = crate::rng::substream(11, crate::rng::StreamKind::Randomization, 0);
        for _ in 0..20 {
            let a = random_hermitian(4, &mut rng);
            let eig = hermitian_eig(&a).unwrap();
            assert!((reconstruct(&eig) - &a).norm() <= 1e-9 * a.norm().max(1e-12));
            let vtv = eig.vectors.adjoint() * &eig.vectors;
            assert!((vtv - CMat::identity(4, 4)).norm() < 1e-10);
            let trace: f64 = (0..4).map(|i| a[(i, i)].re).sum();
            let sum: f64 = eig.values.iter().sum();
            assert!((trace - sum).abs() <= 1e-9 * a.norm().max(1.0));
        }
    }

    #[test]
    fn two_by_two_matches_characteristic_polynomial() {
        let mut rng = crate::rng::substream(12, crate::rng::StreamKind::Randomization, 0);
        for _ in 0..50 {
            let a = random_hermitian(2, &mut rng);
            let eig = hermitian_eig(&a).unwrap();
            let tr = a[(0, 0)].re + a[(1, 1)].re;
            let det = a[(0, 0)].re * a[(1, 1)].re - a[(0, 1)].norm_sqr();
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let hi = tr / 2.0 + disc;
            let lo = tr / 2.0 - disc;
            assert!((eig.values[0] - hi).abs() < 1e-9);
            assert!((eig.values[1] - lo).abs() < 1e-9);
        }
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut a = CMat::identity(3, 3);
        a[(0, 1)] = Complex64::new(0.3, 0.0);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotHermitian(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn eigenvalues_invariant_under_unitary_conjugation(seed in 0u64..1000) {
            let mut rng = crate::rng::substream(seed, crate::rng::StreamKind::Randomization, 7);
            let a = random_hermitian(4, &mut rng);
            // unitary from the eigenvectors of another random Hermitian matrix
            let u = hermitian_eig(&random_hermitian(4, &mut rng)).unwrap().vectors;
            let rotated = &u * &a * u.adjoint();
            let e1 = hermitian_eig(&a).unwrap().values;
            let e2 = hermitian_eig(&hermitize(&rotated)).unwrap().values;
            for (x, y) in e1.iter().zip(e2.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
