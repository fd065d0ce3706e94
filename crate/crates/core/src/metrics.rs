//! Per-subcarrier signal metrics: SINRs, MMSE equalizers and errors, mutual
//! information in bits, weighted MSEs with optimal weights, focused jamming
//! power, interference power at the primary users, and sample-average rate
//! estimates.
//!
//! All logarithms are base 2 and rates are reported in bits/s/Hz. Note that
//! the common-stream SINR denominator sums every private stream (the `i in K`
//! convention), so the common precoder itself never appears in it.

use num_complex::Complex64;
use rand::Rng;

use crate::channels::{conditional_samples, saa_stream, ChannelSet};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{hermitize, quad_form, CMat, CVec};

/// Floor applied to MSE values before taking logs.
pub const EPS_FLOOR: f64 = 1e-15;

/// Common and private precoders for all subcarriers plus the common-rate
/// shares; the optimization variable.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// Common precoder per subcarrier.
    pub common: Vec<CVec>,
    /// Private precoder `[k][n]`.
    pub private: Vec<Vec<CVec>>,
    /// Jamming precoder `[l][n]`; zero off the pilot set.
    pub jamming: Vec<Vec<CVec>>,
    /// Common-rate share `c_bar[k][n]` in bits/s/Hz, nonnegative.
    pub common_shares: Vec<Vec<f64>>,
}

impl PrecoderSet {
    pub fn zeros(nt: usize, num_su: usize, num_au: usize, num_subcarriers: usize) -> Self {
        PrecoderSet {
            common: vec![CVec::zeros(nt); num_subcarriers],
            private: vec![vec![CVec::zeros(nt); num_subcarriers]; num_su],
            jamming: vec![vec![CVec::zeros(nt); num_subcarriers]; num_au],
            common_shares: vec![vec![0.0; num_subcarriers]; num_su],
        }
    }

    pub fn num_subcarriers(&self) -> usize {
        self.common.len()
    }

    pub fn num_su(&self) -> usize {
        self.private.len()
    }

    pub fn num_au(&self) -> usize {
        self.jamming.len()
    }

    /// View of one subcarrier's precoders.
    pub fn slice(&self, n: usize) -> PrecoderSlice<'_> {
        PrecoderSlice {
            common: &self.common[n],
            private: self.private.iter().map(|per_k| &per_k[n]).collect(),
            jamming: self.jamming.iter().map(|per_l| &per_l[n]).collect(),
        }
    }

    /// Total transmit power over all subcarriers and streams.
    pub fn total_power(&self) -> f64 {
        let mut acc = 0.0;
        for n in 0..self.num_subcarriers() {
            acc += self.common[n].norm_squared();
            for per_k in &self.private {
                acc += per_k[n].norm_squared();
            }
            for per_l in &self.jamming {
                acc += per_l[n].norm_squared();
            }
        }
        acc
    }

    /// Check the power budget and share-sign invariants.
    pub fn validate(&self, total_power_budget: f64) -> Result<()> {
        let p = self.total_power();
        if p > total_power_budget + 1e-6 {
            return Err(Error::Precondition(format!(
                "precoder power {p:.9} exceeds budget {total_power_budget:.9}"
            )));
        }
        for per_k in &self.common_shares {
            for &c in per_k {
                if c < -1e-9 {
                    return Err(Error::Precondition(format!(
                        "negative common-rate share {c:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Borrowed per-subcarrier precoders.
#[derive(Debug, Clone)]
pub struct PrecoderSlice<'a> {
    pub common: &'a CVec,
    pub private: Vec<&'a CVec>,
    pub jamming: Vec<&'a CVec>,
}

/// Stream selector for SINR/MMSE evaluation at one user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Common stream decoded at user `k` (privates plus jammers interfere).
    Common { user: usize },
    /// Private stream of user `k` after SIC (other privates plus jammers).
    Private { user: usize },
}

fn interference_terms(h: &CVec, slice: &PrecoderSlice<'_>, stream: Stream) -> (f64, f64) {
    let j: f64 = slice
        .jamming
        .iter()
        .map(|f| (h.adjoint() * *f)[(0, 0)].norm_sqr())
        .sum();
    let z = match stream {
        Stream::Common { .. } => slice
            .private
            .iter()
            .map(|p| (h.adjoint() * *p)[(0, 0)].norm_sqr())
            .sum(),
        Stream::Private { user } => slice
            .private
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != user)
            .map(|(_, p)| (h.adjoint() * *p)[(0, 0)].norm_sqr())
            .sum(),
    };
    (z, j)
}

fn signal_precoder<'a>(slice: &'a PrecoderSlice<'_>, stream: Stream) -> &'a CVec {
    match stream {
        Stream::Common { .. } => slice.common,
        Stream::Private { user } => slice.private[user],
    }
}

/// SINR of the selected stream at a user with channel `h`.
pub fn stream_sinr(
    h: &CVec,
    slice: &PrecoderSlice<'_>,
    stream: Stream,
    n0: f64,
) -> Result<f64> {
    if n0 <= 0.0 {
        return Err(Error::Precondition("noise power must be > 0".into()));
    }
    let p = signal_precoder(slice, stream);
    if p.len() != h.len() {
        return Err(Error::Dimension(format!(
            "channel length {} vs precoder length {}",
            h.len(),
            p.len()
        )));
    }
    let sig = (h.adjoint() * p)[(0, 0)].norm_sqr();
    let (z, j) = interference_terms(h, slice, stream);
    Ok(sig / (n0 + z + j))
}

/// MMSE equalizer and the resulting error for the selected stream:
/// `g = p^H h / (|h^H p|^2 + Z + J + N0)`, `eps = (Z+J+N0)/(|h^H p|^2+Z+J+N0)`.
pub fn mmse_equalizer_and_error(
    h: &CVec,
    slice: &PrecoderSlice<'_>,
    stream: Stream,
    n0: f64,
) -> Result<(Complex64, f64)> {
    if n0 <= 0.0 {
        return Err(Error::Precondition("noise power must be > 0".into()));
    }
    let p = signal_precoder(slice, stream);
    let hp = (h.adjoint() * p)[(0, 0)];
    let (z, j) = interference_terms(h, slice, stream);
    let denom = hp.norm_sqr() + z + j + n0;
    let g = hp.conj() / denom;
    let eps = (z + j + n0) / denom;
    Ok((g, eps))
}

/// `-log2(eps)`; equals `log2(1 + SINR)` for the MMSE error.
pub fn mutual_information_from_error(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Numerical(format!(
            "MMSE error {eps} outside (0, 1]; upstream numerical fault"
        )));
    }
    Ok(-eps.max(EPS_FLOOR).log2())
}

/// Augmented WMSE in bits and the optimal weight `1/eps`.
///
/// The transform is kept in its natural-log form and affinely calibrated to
/// bits, `xi = (omega eps - ln omega - 1)/ln 2 + 1`, so that the weight
/// update `omega = 1/eps` is the exact minimizer, `xi` majorizes `1 - I`
/// for any fixed weight, and at the optimal weight `xi_opt = 1 - I` holds.
/// (The base-2 shorthand `omega eps - log2 omega` has its minimum at
/// `1/(eps ln 2)` instead and loses the majorization property.)
pub fn wmse_and_optimal_weights(eps: f64, weight: Option<f64>) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Precondition(format!("eps {eps} outside (0, 1]")));
    }
    let omega_opt = 1.0 / eps.max(EPS_FLOOR);
    let omega = match weight {
        Some(w) if w <= 0.0 => {
            return Err(Error::Precondition(format!("weight {w} must be > 0")));
        }
        Some(w) => w,
        None => omega_opt,
    };
    Ok((wmse_bits(omega, eps), omega_opt))
}

/// `xi(omega, eps)` in bits; see [`wmse_and_optimal_weights`].
pub fn wmse_bits(omega: f64, eps: f64) -> f64 {
    (omega * eps - omega.ln() - 1.0) / std::f64::consts::LN_2 + 1.0
}

/// Average power focused on a victim with channel covariance `R`:
/// sum of `x^H R x` over every precoder of the slice.
pub fn jamming_power(r: &CMat, slice: &PrecoderSlice<'_>) -> Result<f64> {
    let nt = r.nrows();
    if r.ncols() != nt || slice.common.len() != nt {
        return Err(Error::Dimension(format!(
            "covariance {}x{} vs precoders of length {}",
            r.nrows(),
            r.ncols(),
            slice.common.len()
        )));
    }
    let mut acc = quad_form(r, slice.common);
    for p in &slice.private {
        acc += quad_form(r, p);
    }
    for f in &slice.jamming {
        acc += quad_form(r, f);
    }
    Ok(acc)
}

/// Conditional-mean interference matrix
/// `Phi = (1 - sigma_pe^2) M_hat M_hat^H + sigma_pe^2 Nr I`.
pub fn interference_matrix(m_hat: &CMat, sigma_pe2: f64, nr: usize) -> Result<CMat> {
    if !(0.0..=1.0).contains(&sigma_pe2) {
        return Err(Error::Precondition(format!(
            "sigma_pe2 {sigma_pe2} outside [0, 1]"
        )));
    }
    let nt = m_hat.nrows();
    let mut phi = hermitize(&(m_hat * m_hat.adjoint())) * Complex64::new(1.0 - sigma_pe2, 0.0);
    let diag = sigma_pe2 * nr as f64;
    for i in 0..nt {
        phi[(i, i)] += Complex64::new(diag, 0.0);
    }
    Ok(phi)
}

/// Conditional-mean interference power at one primary user: returns `Phi`
/// and `Psi_bar`, the sum of quadratic forms of all precoders against it.
pub fn interference_power(
    m_hat: &CMat,
    sigma_pe2: f64,
    nr: usize,
    slice: &PrecoderSlice<'_>,
) -> Result<(CMat, f64)> {
    let phi = interference_matrix(m_hat, sigma_pe2, nr)?;
    let psi = jamming_power(&phi, slice)?;
    Ok((phi, psi))
}

/// Sample-average mutual information for one user on one subcarrier:
/// `(I_bar_common, I_bar_private)` averaged over conditional channel draws.
pub fn saa_user_rates<R: Rng + ?Sized>(
    h_hat: &CVec,
    sigma2: f64,
    slice: &PrecoderSlice<'_>,
    user: usize,
    n0: f64,
    sample_count: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let samples = conditional_samples(h_hat, sigma2, sample_count, rng)?;
    let mut common = 0.0;
    let mut private = 0.0;
    for h in &samples {
        let (_, eps_c) = mmse_equalizer_and_error(h, slice, Stream::Common { user }, n0)?;
        let (_, eps_p) = mmse_equalizer_and_error(h, slice, Stream::Private { user }, n0)?;
        common += mutual_information_from_error(eps_c)?;
        private += mutual_information_from_error(eps_p)?;
    }
    let s = sample_count as f64;
    Ok((common / s, private / s))
}

/// Sample-average mutual information for every user on one subcarrier.
pub fn saa_rate_estimates<R: Rng + ?Sized>(
    h_hats: &[CVec],
    sigma2: f64,
    slice: &PrecoderSlice<'_>,
    n0: f64,
    sample_count: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut common = Vec::with_capacity(h_hats.len());
    let mut private = Vec::with_capacity(h_hats.len());
    for (k, h_hat) in h_hats.iter().enumerate() {
        let (c, p) = saa_user_rates(h_hat, sigma2, slice, k, n0, sample_count, rng)?;
        common.push(c);
        private.push(p);
    }
    Ok((common, private))
}

/// Per-subcarrier average mutual information entries of a rate report.
#[derive(Debug, Clone)]
pub struct SubcarrierRates {
    /// Subcarrier index, 0-based.
    pub subcarrier: usize,
    /// `min_k I_bar_{c,k,n}`.
    pub common_capacity: f64,
    /// `I_bar_{k,n}` per user.
    pub private: Vec<f64>,
}

/// Average-rate summary of a precoder set on one channel realization.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub r_private: Vec<f64>,
    pub r_common: f64,
    /// Private rate plus allocated common share, per user.
    pub r_user: Vec<f64>,
    pub r_sum: f64,
    pub per_subcarrier: Vec<SubcarrierRates>,
}

impl RateReport {
    /// CSV with one row per subcarrier and a summary row.
    pub fn to_csv(&self) -> String {
        let k = self.r_private.len();
        let mut out = String::from("n,I_common_min");
        for i in 0..k {
            out.push_str(&format!(",I_private_{}", i + 1));
        }
        out.push('\n');
        for row in &self.per_subcarrier {
            out.push_str(&format!("{},{}", row.subcarrier + 1, fmt(row.common_capacity)));
            for v in &row.private {
                out.push_str(&format!(",{}", fmt(*v)));
            }
            out.push('\n');
        }
        out.push_str(&format!("sum,{}", fmt(self.r_common)));
        for v in &self.r_private {
            out.push_str(&format!(",{}", fmt(*v)));
        }
        out.push('\n');
        out
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Full rate report via sample-average estimation, deterministic given the
/// config seed. Uses the same per-(user, subcarrier) SAA streams as the
/// solver so both average over identical conditional draws.
pub fn rate_report(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    saa_samples: usize,
) -> Result<RateReport> {
    let n = cfg.num_subcarriers;
    let k_users = cfg.num_su;
    let n0 = cfg.noise_power;
    let mut per_subcarrier = Vec::with_capacity(n);
    let mut r_private = vec![0.0; k_users];
    let mut r_user = vec![0.0; k_users];
    let mut r_common = 0.0;

    for sc in 0..n {
        let slice = precoders.slice(sc);
        let mut commons = Vec::with_capacity(k_users);
        let mut privates = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let mut rng = saa_stream(cfg.seed, k, sc);
            let (c, p) = saa_user_rates(
                &channels.su_est[k][sc],
                channels.sigma_ie2,
                &slice,
                k,
                n0,
                saa_samples,
                &mut rng,
            )?;
            commons.push(c);
            privates.push(p);
        }
        let capacity = commons.iter().cloned().fold(f64::INFINITY, f64::min);
        let share_sum: f64 = (0..k_users).map(|k| precoders.common_shares[k][sc]).sum();
        if share_sum > capacity + 1e-6 {
            return Err(Error::ShareViolation {
                subcarrier: sc + 1,
                share_sum,
                capacity,
            });
        }
        r_common += capacity;
        for k in 0..k_users {
            r_private[k] += privates[k];
            r_user[k] += precoders.common_shares[k][sc] + privates[k];
        }
        per_subcarrier.push(SubcarrierRates {
            subcarrier: sc,
            common_capacity: capacity,
            private: privates,
        });
    }

    let n_f = n as f64;
    r_common /= n_f;
    for k in 0..k_users {
        r_private[k] /= n_f;
        r_user[k] /= n_f;
    }
    let r_sum = r_common + r_private.iter().sum::<f64>();
    Ok(RateReport {
        r_private,
        r_common,
        r_user,
        r_sum,
        per_subcarrier,
    })
}
