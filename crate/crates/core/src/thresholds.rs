//! Feasible jamming and interference power thresholds.
//!
//! The jamming floor on a pilot subcarrier is `rho * Pt * sigma_max(R) /
//! (Np L)`; the interference cap paired with it comes from the eigenspace
//! overlap of the victim covariance `R` and the primary-user matrix `Phi`,
//! with a perfect-CSIT branch that relaxes the cap to `mu` whenever a
//! null-space direction of the primary channel already carries enough
//! jamming power. Every threshold pair ships with a constructive witness
//! vector certifying joint feasibility.

use num_complex::Complex64;

use crate::channels::ChannelSet;
use crate::config::ScenarioConfig;
use crate::conic::{hermitian_eig, principal_eigenvector, HermitianEig};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, CMat, CVec};
use crate::metrics::interference_matrix;

/// Relative eigenvalue cutoff for numerical rank decisions.
const RANK_CUT: f64 = 1e-9;
/// Slack on the perfect-CSIT branch comparison to avoid boundary flapping.
const BRANCH_SLACK: f64 = 1e-12;

/// Per-subcarrier jamming floors and interference caps.
#[derive(Debug, Clone)]
pub struct ThresholdSet {
    /// `J_thr[l][n]`; `None` off the pilot set of adversarial user `l`.
    pub jamming: Vec<Vec<Option<f64>>>,
    /// `I_thr[m][n]` for every subcarrier.
    pub interference: Vec<Vec<f64>>,
    pub rho: f64,
    pub mu: f64,
    /// Branch bookkeeping per `(l, m, n)` on pilot subcarriers, for audit.
    pub branches: Vec<PsiRecord>,
}

/// One evaluation of the threshold function, kept for the audit CSV.
#[derive(Debug, Clone)]
pub struct PsiRecord {
    pub au: usize,
    pub pu: usize,
    /// 0-based subcarrier.
    pub subcarrier: usize,
    pub value: f64,
    /// Index `j` (0-based eigenvector column) that fired the perfect-CSIT
    /// branch, if any.
    pub branch: Option<usize>,
}

/// Outcome of the threshold function: the cap plus which branch produced it.
#[derive(Debug, Clone, Copy)]
pub struct PsiOutcome {
    pub value: f64,
    /// Eigenvector column of `Phi` that fired the relaxation branch.
    pub branch: Option<usize>,
}

fn psd_eig(m: &CMat, what: &str) -> Result<HermitianEig> {
    let eig = hermitian_eig(m)?;
    let min = *eig.values.last().unwrap();
    if min < -1e-8 {
        return Err(Error::NotPsd(min));
    }
    let _ = what;
    Ok(eig)
}

fn numerical_rank(values: &[f64]) -> usize {
    let top = values[0].max(0.0);
    if top <= 0.0 {
        return 0;
    }
    values.iter().filter(|&&v| v > RANK_CUT * top).count()
}

/// Maximum feasible jamming floor `rho * Pt * sigma_max(R) / (Np L)`.
pub fn jamming_threshold(
    rho: f64,
    total_power: f64,
    num_pilots: usize,
    num_au: usize,
    r: &CMat,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Precondition(format!("rho {rho} outside [0, 1]")));
    }
    let eig = psd_eig(r, "jamming covariance")?;
    let sigma_max = eig.values[0].max(0.0);
    Ok(rho * total_power * sigma_max / (num_pilots as f64 * num_au as f64))
}

/// Interference cap for one (adversarial user, primary user) pair.
///
/// Eigendecomposes both matrices, projects the principal jamming direction
/// onto the nonzero eigenspace of `Phi`, and, under perfect primary CSIT,
/// relaxes the cap to `mu` when some null-space column of `Phi` already
/// satisfies the jamming floor.
pub fn interference_threshold_psi(
    rho: f64,
    total_power: f64,
    num_pilots: usize,
    num_au: usize,
    r: &CMat,
    phi: &CMat,
    mu: f64,
    sigma_pe: f64,
) -> Result<PsiOutcome> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Precondition(format!("rho {rho} outside [0, 1]")));
    }
    if mu < 0.0 {
        return Err(Error::Precondition(format!("mu {mu} must be >= 0")));
    }
    let r_eig = psd_eig(r, "jamming covariance")?;
    let phi_eig = psd_eig(phi, "interference matrix")?;
    let nt = r_eig.dim();
    if phi_eig.dim() != nt {
        return Err(Error::Dimension(format!(
            "R is {}x{} but Phi is {}x{}",
            nt,
            nt,
            phi_eig.dim(),
            phi_eig.dim()
        )));
    }
    let sigma_max = r_eig.values[0].max(0.0);
    let u_max = principal_eigenvector(&r_eig);
    let n_m = numerical_rank(&phi_eig.values);
    let n_g = numerical_rank(&r_eig.values);

    let unit = total_power / (num_pilots as f64 * num_au as f64);
    let mut value = 0.0;
    for i in 0..n_m {
        let v_i = phi_eig.vectors.column(i);
        let overlap = (u_max.adjoint() * v_i)[(0, 0)].norm_sqr();
        value += phi_eig.values[i] * overlap;
    }
    let mut outcome = PsiOutcome {
        value: rho * unit * value,
        branch: None,
    };

    if sigma_pe == 0.0 && sigma_max > 0.0 {
        for j in n_m..nt {
            let v_j = phi_eig.vectors.column(j);
            let mut reachable = 0.0;
            for i in 0..n_g {
                let overlap = (r_eig.vectors.column(i).adjoint() * v_j)[(0, 0)].norm_sqr();
                reachable += r_eig.values[i] * overlap;
            }
            if rho < reachable / sigma_max - BRANCH_SLACK {
                outcome = PsiOutcome {
                    value: mu,
                    branch: Some(j),
                };
                break;
            }
        }
    }
    Ok(outcome)
}

/// Source of the primary-user interference matrix.
pub enum PhiSource<'a> {
    Matrix(&'a CMat),
    Estimate {
        m_hat: &'a CMat,
        sigma_pe2: f64,
        nr: usize,
    },
}

impl PhiSource<'_> {
    fn matrix(&self) -> Result<CMat> {
        match self {
            PhiSource::Matrix(m) => Ok((*m).clone()),
            PhiSource::Estimate {
                m_hat,
                sigma_pe2,
                nr,
            } => interference_matrix(m_hat, *sigma_pe2, *nr),
        }
    }
}

/// Closed-form cross-checks of the threshold function.
#[derive(Debug, Clone)]
pub struct ClosedFormReport {
    /// `rho sigma_pe^2 Nr Pt / (Np L)`, available when the isotropic-victim
    /// preconditions hold and the closed form was requested.
    pub special_case_value: Option<f64>,
    /// Upper bound `Pt lambda_max(Phi) / (Np L)`.
    pub upper_bound: f64,
    pub psi_value: f64,
    pub psi_within_bound: bool,
}

/// Evaluate the threshold function against its closed-form special case and
/// the trivial upper bound.
///
/// The special case needs `R = I`, `Nt > Nr` and `rho < 1`; requesting it
/// outside those preconditions is an error.
pub fn closed_form_checks(
    r: &CMat,
    phi_source: PhiSource<'_>,
    rho: f64,
    total_power: f64,
    num_pilots: usize,
    num_au: usize,
    want_special_case: bool,
) -> Result<ClosedFormReport> {
    let phi = phi_source.matrix()?;
    let unit = total_power / (num_pilots as f64 * num_au as f64);

    let special_case_value = if want_special_case {
        let (sigma_pe2, nr) = match &phi_source {
            PhiSource::Estimate { sigma_pe2, nr, .. } => (*sigma_pe2, *nr),
            PhiSource::Matrix(_) => {
                return Err(Error::Precondition(
                    "closed form needs the (M_hat, sigma_pe2, Nr) description of Phi".into(),
                ));
            }
        };
        let nt = r.nrows();
        if (r - CMat::identity(nt, nt)).norm() > 1e-9 {
            return Err(Error::Precondition(
                "closed form requires an identity jamming covariance".into(),
            ));
        }
        if nt <= nr {
            return Err(Error::Precondition(format!(
                "closed form requires Nt > Nr, got Nt = {nt}, Nr = {nr}"
            )));
        }
        if rho >= 1.0 {
            return Err(Error::Precondition("closed form requires rho < 1".into()));
        }
        Some(rho * sigma_pe2 * nr as f64 * unit)
    } else {
        None
    };

    let phi_eig = psd_eig(&phi, "interference matrix")?;
    let upper_bound = unit * phi_eig.values[0].max(0.0);
    let sigma_pe = match &phi_source {
        PhiSource::Estimate { sigma_pe2, .. } => sigma_pe2.sqrt(),
        // a raw Phi carries no estimation-error information; the branch
        // condition is only defined for the estimate form
        PhiSource::Matrix(_) => f64::NAN,
    };
    let psi = interference_threshold_psi(
        rho,
        total_power,
        num_pilots,
        num_au,
        r,
        &phi,
        0.0,
        if sigma_pe.is_nan() { 1.0 } else { sigma_pe },
    )?;
    Ok(ClosedFormReport {
        special_case_value,
        upper_bound,
        psi_value: psi.value,
        psi_within_bound: psi.value <= upper_bound + 1e-12,
    })
}

/// Jamming witness `f' = sqrt(rho Pt / (Np L)) u_max`: meets the jamming
/// floor with equality and never exceeds the per-subcarrier power share.
pub fn feasibility_witness(
    rho: f64,
    total_power: f64,
    num_pilots: usize,
    num_au: usize,
    r: &CMat,
) -> Result<CVec> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Precondition(format!("rho {rho} outside [0, 1]")));
    }
    let eig = psd_eig(r, "jamming covariance")?;
    let u_max = principal_eigenvector(&eig);
    let norm2 = rho * total_power / (num_pilots as f64 * num_au as f64);
    Ok(u_max * Complex64::new(norm2.sqrt(), 0.0))
}

/// Branch-aware witness certifying the jamming floor and the interference
/// cap simultaneously. When the relaxation branch fires, the witness moves
/// to the null-space column at full per-subcarrier power, where the jamming
/// floor holds strictly and the interference is exactly zero.
pub fn joint_witness(
    rho: f64,
    total_power: f64,
    num_pilots: usize,
    num_au: usize,
    r: &CMat,
    phi: &CMat,
    mu: f64,
    sigma_pe: f64,
) -> Result<CVec> {
    let psi = interference_threshold_psi(
        rho,
        total_power,
        num_pilots,
        num_au,
        r,
        phi,
        mu,
        sigma_pe,
    )?;
    match psi.branch {
        None => feasibility_witness(rho, total_power, num_pilots, num_au, r),
        Some(j) => {
            let phi_eig = psd_eig(phi, "interference matrix")?;
            let v_j = CVec::from_fn(phi_eig.dim(), |i, _| phi_eig.vectors[(i, j)]);
            let norm2 = total_power / (num_pilots as f64 * num_au as f64);
            Ok(v_j * Complex64::new(norm2.sqrt(), 0.0))
        }
    }
}

/// Assemble the full threshold set for a scenario, certifying each pilot
/// subcarrier's constraint pair with the constructive witness.
pub fn assemble_thresholds(cfg: &ScenarioConfig, channels: &ChannelSet) -> Result<ThresholdSet> {
    let n = cfg.num_subcarriers;
    let sigma_pe2 = channels.sigma_pe2;
    let sigma_pe = sigma_pe2.sqrt();
    let mut jamming = vec![vec![None; n]; cfg.num_au];
    let mut interference = vec![vec![0.0; n]; cfg.num_pu];
    let mut branches = Vec::new();

    // Phi per (m, n)
    let mut phis: Vec<Vec<CMat>> = Vec::with_capacity(cfg.num_pu);
    for m in 0..cfg.num_pu {
        let mut per_sc = Vec::with_capacity(n);
        for sc in 0..n {
            per_sc.push(interference_matrix(
                &channels.pu_est[m][sc],
                sigma_pe2,
                cfg.pu_rx_antennas[m],
            )?);
        }
        phis.push(per_sc);
    }

    for l in 0..cfg.num_au {
        let np = cfg.num_pilots(l);
        for &sc in &cfg.pilot_set_zero_based(l) {
            let r = &channels.au_cov[l][sc];
            let j_thr = jamming_threshold(cfg.rho, cfg.total_power, np, cfg.num_au, r)?;
            jamming[l][sc] = Some(j_thr);
            for m in 0..cfg.num_pu {
                let phi = &phis[m][sc];
                let psi = interference_threshold_psi(
                    cfg.rho,
                    cfg.total_power,
                    np,
                    cfg.num_au,
                    r,
                    phi,
                    cfg.mu,
                    sigma_pe,
                )?;
                interference[m][sc] += psi.value;
                branches.push(PsiRecord {
                    au: l,
                    pu: m,
                    subcarrier: sc,
                    value: psi.value,
                    branch: psi.branch,
                });

                // certify the pair with the constructive witness
                let witness = joint_witness(
                    cfg.rho,
                    cfg.total_power,
                    np,
                    cfg.num_au,
                    r,
                    phi,
                    cfg.mu,
                    sigma_pe,
                )?;
                let jam = quad_form(r, &witness);
                if jam < j_thr - 1e-9 {
                    return Err(Error::Infeasible(format!(
                        "witness jamming power {jam:.9} below floor {j_thr:.9} \
                         for AU {l}, subcarrier {}",
                        sc + 1
                    )));
                }
                let intf = quad_form(phi, &witness);
                if intf > psi.value + 1e-9 {
                    return Err(Error::Infeasible(format!(
                        "witness interference {intf:.9} above cap {:.9} \
                         for AU {l}, PU {m}, subcarrier {}",
                        psi.value,
                        sc + 1
                    )));
                }
            }
        }
    }

    // Data subcarriers: uniform protection at mu * L per primary user,
    // clamped into the aggregate trivial bound so the cap stays meaningful.
    for m in 0..cfg.num_pu {
        for sc in 0..n {
            if !cfg.is_pilot_subcarrier(sc) {
                let mut bound = 0.0;
                let lam_max = psd_eig(&phis[m][sc], "interference matrix")?.values[0].max(0.0);
                for l in 0..cfg.num_au {
                    bound +=
                        cfg.total_power * lam_max / (cfg.num_pilots(l) as f64 * cfg.num_au as f64);
                }
                if cfg.num_au == 0 {
                    bound = f64::INFINITY;
                }
                interference[m][sc] = (cfg.mu * cfg.num_au.max(1) as f64).min(bound);
            }
        }
    }

    Ok(ThresholdSet {
        jamming,
        interference,
        rho: cfg.rho,
        mu: cfg.mu,
        branches,
    })
}

impl ThresholdSet {
    /// Audit CSV: one row per threshold entry with the branch taken.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,user,n,threshold,branch\n");
        for (l, per_sc) in self.jamming.iter().enumerate() {
            for (sc, thr) in per_sc.iter().enumerate() {
                if let Some(t) = thr {
                    out.push_str(&format!("jamming,{},{},{:.12e},-\n", l + 1, sc + 1, t));
                }
            }
        }
        for rec in &self.branches {
            out.push_str(&format!(
                "psi,{}-{},{},{:.12e},{}\n",
                rec.au + 1,
                rec.pu + 1,
                rec.subcarrier + 1,
                rec.value,
                rec.branch.map_or("base".to_string(), |j| format!("mu[{j}]")),
            ));
        }
        for (m, per_sc) in self.interference.iter().enumerate() {
            for (sc, t) in per_sc.iter().enumerate() {
                out.push_str(&format!(
                    "interference,{},{},{:.12e},-\n",
                    m + 1,
                    sc + 1,
                    t
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitize;
    use crate::rng::{complex_gaussian, substream, StreamKind};
    use rand::Rng;

    fn diag4(values: [f64; 4]) -> CMat {
        CMat::from_fn(4, 4, |i, j| {
            if i == j {
                Complex64::new(values[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> CMat {
        let raw = CMat::from_fn(n, n, |_, _| complex_gaussian(rng));
        hermitize(&(&raw * raw.adjoint()))
    }

    #[test]
    fn jamming_threshold_examples() {
        let r = CMat::identity(4, 4);
        let j = jamming_threshold(0.45, 100.0, 8, 1, &r).unwrap();
        assert!((j - 5.625).abs() < 1e-12);

        assert_eq!(jamming_threshold(0.0, 100.0, 8, 1, &r).unwrap(), 0.0);

        let r = diag4([3.0, 1.0, 0.0, 0.0]);
        let j = jamming_threshold(1.0, 100.0, 8, 1, &r).unwrap();
        assert!((j - 37.5).abs() < 1e-12);

        let mut bad = CMat::identity(2, 2);
        bad[(0, 0)] = Complex64::new(-1.0, 0.0);
        assert!(matches!(
            jamming_threshold(0.5, 1.0, 1, 1, &bad),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn psi_branch_and_base_examples() {
        // base value zero, branch fires, returns mu
        let r = diag4([0.0, 0.0, 1.0, 0.0]);
        let phi = diag4([2.0, 1.0, 0.0, 0.0]);
        let out =
            interference_threshold_psi(0.45, 100.0, 8, 1, &r, &phi, 0.125, 0.0).unwrap();
        assert_eq!(out.value, 0.125);
        assert!(out.branch.is_some());

        // aligned principal directions, no branch (sigma_pe > 0)
        let r = diag4([2.0, 0.0, 0.0, 0.0]);
        let phi = diag4([3.0, 1.0, 1.0, 1.0]);
        let out = interference_threshold_psi(0.45, 100.0, 8, 1, &r, &phi, 0.125, 0.5).unwrap();
        assert!((out.value - 16.875).abs() < 1e-9);
        assert!(out.branch.is_none());
    }

    /// Closed-form 2x2 Hermitian eigendecomposition via the characteristic
    /// polynomial, independent of the Jacobi solver.
    fn eig2(a: &CMat) -> (Vec<f64>, Vec<CVec>) {
        let tr = a[(0, 0)].re + a[(1, 1)].re;
        let det = a[(0, 0)].re * a[(1, 1)].re - a[(0, 1)].norm_sqr();
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let hi = tr / 2.0 + disc;
        let lo = tr / 2.0 - disc;
        let vec_for = |lam: f64| -> CVec {
            let b = a[(0, 1)];
            let v = if b.norm() > 1e-14 {
                CVec::from_vec(vec![b, Complex64::new(lam - a[(0, 0)].re, 0.0)])
            } else if a[(0, 0)].re >= a[(1, 1)].re && (lam - a[(0, 0)].re).abs() < 1e-12 {
                CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
            } else if (lam - a[(0, 0)].re).abs() < (lam - a[(1, 1)].re).abs() {
                CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])
            } else {
                CVec::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
            };
            let norm = v.norm();
            v * Complex64::new(1.0 / norm, 0.0)
        };
        (vec![hi, lo], vec![vec_for(hi), vec_for(lo)])
    }

    #[test]
    fn psi_matches_two_by_two_closed_form_oracle() {
        let mut rng = substream(31, StreamKind::Randomization, 0);
        for _ in 0..50 {
            let r = random_psd(2, &mut rng);
            let phi = random_psd(2, &mut rng);
            let got = interference_threshold_psi(0.45, 100.0, 8, 1, &r, &phi, 0.1, 0.3)
                .unwrap()
                .value;

            let (r_vals, r_vecs) = eig2(&r);
            let (phi_vals, phi_vecs) = eig2(&phi);
            let u_max = &r_vecs[0];
            let _ = r_vals;
            let mut expected = 0.0;
            for i in 0..2 {
                if phi_vals[i] > 1e-9 * phi_vals[0].max(1e-300) {
                    let overlap = (u_max.adjoint() * &phi_vecs[i])[(0, 0)].norm_sqr();
                    expected += phi_vals[i] * overlap;
                }
            }
            expected *= 0.45 * 100.0 / 8.0;
            assert!(
                (got - expected).abs() < 1e-9 * expected.max(1.0),
                "got {got} expected {expected}"
            );
        }
    }

    #[test]
    fn closed_form_report_examples() {
        let mut rng = substream(32, StreamKind::Randomization, 0);
        let m_hat = CMat::from_fn(4, 2, |_, _| complex_gaussian(&mut rng));
        let r = CMat::identity(4, 4);
        let report = closed_form_checks(
            &r,
            PhiSource::Estimate {
                m_hat: &m_hat,
                sigma_pe2: 0.25,
                nr: 2,
            },
            0.45,
            100.0,
            8,
            1,
            true,
        )
        .unwrap();
        assert!((report.special_case_value.unwrap() - 2.8125).abs() < 1e-12);
        assert!(report.psi_within_bound);

        let phi = diag4([3.0, 1.0, 1.0, 1.0]);
        let report = closed_form_checks(
            &diag4([1.0, 1.0, 1.0, 1.0]),
            PhiSource::Matrix(&phi),
            0.45,
            100.0,
            8,
            1,
            false,
        )
        .unwrap();
        assert!((report.upper_bound - 37.5).abs() < 1e-12);

        // violated preconditions
        let bad = closed_form_checks(
            &diag4([2.0, 1.0, 1.0, 1.0]),
            PhiSource::Estimate {
                m_hat: &m_hat,
                sigma_pe2: 0.25,
                nr: 2,
            },
            0.45,
            100.0,
            8,
            1,
            true,
        );
        assert!(matches!(bad, Err(Error::Precondition(_))));
    }

    #[test]
    fn psi_never_exceeds_upper_bound_on_random_pairs() {
        let mut rng = substream(33, StreamKind::Randomization, 0);
        for _ in 0..50 {
            let r = random_psd(4, &mut rng);
            let phi = random_psd(4, &mut rng);
            let report = closed_form_checks(
                &r,
                PhiSource::Matrix(&phi),
                0.9,
                100.0,
                8,
                1,
                false,
            )
            .unwrap();
            assert!(report.psi_within_bound);
        }
    }

    #[test]
    fn witness_examples_and_properties() {
        // rho = 0 gives the zero vector
        let r = CMat::identity(4, 4);
        let w = feasibility_witness(0.0, 100.0, 8, 1, &r).unwrap();
        assert_eq!(w.norm(), 0.0);

        // identity covariance: first canonical direction at the right norm
        let w = feasibility_witness(0.45, 100.0, 8, 1, &r).unwrap();
        assert!((w.norm_squared() - 5.625).abs() < 1e-12);
        assert!((w[0].re - 5.625f64.sqrt()).abs() < 1e-12);

        let mut rng = substream(34, StreamKind::Randomization, 0);
        for _ in 0..100 {
            let r = random_psd(4, &mut rng);
            let phi = random_psd(4, &mut rng);
            let j_thr = jamming_threshold(0.45, 100.0, 8, 1, &r).unwrap();
            let psi = interference_threshold_psi(0.45, 100.0, 8, 1, &r, &phi, 0.1, 0.3)
                .unwrap()
                .value;
            let w = joint_witness(0.45, 100.0, 8, 1, &r, &phi, 0.1, 0.3).unwrap();
            assert!(quad_form(&r, &w) >= j_thr - 1e-9);
            assert!(quad_form(&phi, &w) <= psi + 1e-9);
            assert!(w.norm_squared() <= 100.0 / 8.0 + 1e-12);
        }
    }

    #[test]
    fn witness_covers_the_branch_case() {
        // perfect CSIT, rank-deficient Phi, branch fires
        let r = diag4([0.0, 0.0, 1.0, 0.0]);
        let phi = diag4([2.0, 1.0, 0.0, 0.0]);
        let j_thr = jamming_threshold(0.45, 100.0, 8, 1, &r).unwrap();
        let psi = interference_threshold_psi(0.45, 100.0, 8, 1, &r, &phi, 0.125, 0.0).unwrap();
        assert!(psi.branch.is_some());
        let w = joint_witness(0.45, 100.0, 8, 1, &r, &phi, 0.125, 0.0).unwrap();
        assert!(quad_form(&r, &w) >= j_thr - 1e-9);
        assert!(quad_form(&phi, &w) <= psi.value + 1e-9);
        assert!(w.norm_squared() <= 100.0 / 8.0 + 1e-12);
    }

    #[test]
    fn psi_is_invariant_under_joint_unitary_conjugation() {
        let mut rng = substream(35, StreamKind::Randomization, 0);
        for _ in 0..20 {
            let r = random_psd(4, &mut rng);
            let phi = random_psd(4, &mut rng);
            let u = hermitian_eig(&random_psd(4, &mut rng)).unwrap().vectors;
            let r_rot = hermitize(&(&u * &r * u.adjoint()));
            let phi_rot = hermitize(&(&u * &phi * u.adjoint()));
            let a = interference_threshold_psi(0.7, 50.0, 4, 1, &r, &phi, 0.2, 0.3)
                .unwrap()
                .value;
            let b = interference_threshold_psi(0.7, 50.0, 4, 1, &r_rot, &phi_rot, 0.2, 0.3)
                .unwrap()
                .value;
            assert!((a - b).abs() < 1e-9 * a.max(1.0), "a {a} b {b}");
        }
    }

    #[test]
    fn psi_scales_linearly_in_power_and_rho() {
        let mut rng = substream(36, StreamKind::Randomization, 0);
        let r = random_psd(4, &mut rng);
        let phi = random_psd(4, &mut rng);
        let base = interference_threshold_psi(0.3, 10.0, 4, 2, &r, &phi, 0.0, 0.5)
            .unwrap()
            .value;
        let power = interference_threshold_psi(0.3, 30.0, 4, 2, &r, &phi, 0.0, 0.5)
            .unwrap()
            .value;
        let strict = interference_threshold_psi(0.6, 10.0, 4, 2, &r, &phi, 0.0, 0.5)
            .unwrap()
            .value;
        assert!((power - 3.0 * base).abs() < 1e-9 * base.max(1.0));
        assert!((strict - 2.0 * base).abs() < 1e-9 * base.max(1.0));
    }

    #[test]
    fn jamming_threshold_is_monotone_under_psd_perturbation() {
        let mut rng = substream(37, StreamKind::Randomization, 0);
        for _ in 0..20 {
            let r = random_psd(4, &mut rng);
            let bumped = &r + CMat::identity(4, 4) * Complex64::new(0.05, 0.0);
            let a = jamming_threshold(0.8, 20.0, 2, 1, &r).unwrap();
            let b = jamming_threshold(0.8, 20.0, 2, 1, &bumped).unwrap();
            assert!(a <= b + 1e-12);
        }
    }

    #[test]
    fn assemble_produces_certified_thresholds() {
        let cfg = crate::channels::tests_support::small_cfg();
        let channels = crate::channels::generate_channel_set(&cfg, 0).unwrap();
        let thr = assemble_thresholds(&cfg, &channels).unwrap();
        for &sc in &cfg.pilot_set_zero_based(0) {
            assert!(thr.jamming[0][sc].is_some());
            assert!(thr.interference[0][sc] >= 0.0);
        }
        // data subcarriers get the uniform cap
        for sc in 0..cfg.num_subcarriers {
            if !cfg.is_pilot_subcarrier(sc) {
                assert!(thr.interference[0][sc] <= cfg.mu * cfg.num_au as f64 + 1e-12);
            }
        }
        let csv = thr.to_csv();
        assert!(csv.starts_with("kind,user,n,threshold,branch"));
        assert!(csv.contains("jamming,1,1,"));
    }

    #[test]
    fn zero_rho_zero_mu_gives_all_zero_thresholds() {
        let mut cfg = crate::channels::tests_support::small_cfg();
        cfg.rho = 0.0;
        cfg.mu = 0.0;
        let channels = crate::channels::generate_channel_set(&cfg, 0).unwrap();
        let thr = assemble_thresholds(&cfg, &channels).unwrap();
        for per_sc in &thr.jamming {
            for t in per_sc.iter().flatten() {
                assert_eq!(*t, 0.0);
            }
        }
        for per_sc in &thr.interference {
            for t in per_sc {
                assert_eq!(*t, 0.0);
            }
        }
    }
}
