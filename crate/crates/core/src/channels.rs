//! Frequency-selective channel generation and CSIT error models.
//!
//! Channels come from a synthetic tapped-delay-line: per user a handful of
//! clusters at fixed departure angles, exponential power-delay profile with
//! the configured RMS delay spread, i.i.d. complex Gaussian tap gains, and a
//! DFT to per-subcarrier responses. The per-subcarrier energy is normalized
//! so that `E||h_{k,n}||^2 = Nt`. Transmitter-side knowledge follows the
//! imperfect-CSIT composition for served and primary users and a covariance
//! estimate for adversarial users.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::rng::{complex_gaussian, substream, StreamKind};

/// Independent channel realizations averaged into each AU covariance.
const COVARIANCE_SAMPLES: usize = 128;

/// True channels, transmitter-side estimates and AU covariances for one
/// realization. Immutable after creation; cheap to share across workers.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// True SU channels `h[k][n]`, length `Nt` each.
    pub su_true: Vec<Vec<CVec>>,
    /// SU estimates `h_hat[k][n]`.
    pub su_est: Vec<Vec<CVec>>,
    /// SU estimation error variance in [0, 1].
    pub sigma_ie2: f64,
    /// True PU channels `M[m][n]`, `Nt x Nr[m]`.
    pub pu_true: Vec<Vec<CMat>>,
    /// PU estimates `M_hat[m][n]`.
    pub pu_est: Vec<Vec<CMat>>,
    /// PU estimation error variance in [0, 1].
    pub sigma_pe2: f64,
    /// True AU channels `g[l][n]`.
    pub au_true: Vec<Vec<CVec>>,
    /// AU channel covariances `R[l][n]`, Hermitian PSD.
    pub au_cov: Vec<Vec<CMat>>,
}

/// Fixed spatial geometry of one user: cluster angles plus the tap powers.
struct TapGeometry {
    /// Steering vector per tap (unit-modulus entries).
    steering: Vec<CVec>,
    /// Tap powers, summing to one.
    powers: Vec<f64>,
}

impl TapGeometry {
    fn draw(nt: usize, taps: usize, decay: f64, rng: &mut impl Rng) -> TapGeometry {
        let mut powers: Vec<f64> = (0..taps).map(|t| (-(t as f64) * decay).exp()).collect();
        let total: f64 = powers.iter().sum();
        for p in powers.iter_mut() {
            *p /= total;
        }
        let steering = (0..taps)
            .map(|_| {
                let angle: f64 = rng.random_range(-std::f64::consts::FRAC_PI_2
                    ..std::f64::consts::FRAC_PI_2);
                let phase = std::f64::consts::PI * angle.sin();
                CVec::from_fn(nt, |i, _| Complex64::from_polar(1.0, -(i as f64) * phase))
            })
            .collect();
        TapGeometry { steering, powers }
    }

    /// One realization: fresh tap gains on the fixed geometry, then a DFT to
    /// per-subcarrier responses.
    fn realize(&self, num_subcarriers: usize, rng: &mut impl Rng) -> Vec<CVec> {
        let gains: Vec<Complex64> = self
            .powers
            .iter()
            .map(|&p| complex_gaussian(rng) * Complex64::new(p.sqrt(), 0.0))
            .collect();
        let nt = self.steering[0].len();
        (0..num_subcarriers)
            .map(|n| {
                let mut h = CVec::zeros(nt);
                for (t, gain) in gains.iter().enumerate() {
                    let rot = Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * (n as f64) * (t as f64)
                            / num_subcarriers as f64,
                    );
                    h += &self.steering[t] * (gain * rot);
                }
                h
            })
            .collect()
    }
}

/// `sqrt(1 - sigma2) h_hat + sqrt(sigma2) e` with `e` i.i.d. unit-variance
/// circular complex Gaussian.
pub fn compose_true_channel(
    h_hat: &CVec,
    sigma2: f64,
    rng: &mut (impl Rng + ?Sized),
) -> Result<CVec> {
    if !(0.0..=1.0).contains(&sigma2) {
        return Err(Error::Precondition(format!(
            "error variance {sigma2} outside [0, 1]"
        )));
    }
    let keep = Complex64::new((1.0 - sigma2).sqrt(), 0.0);
    let err = Complex64::new(sigma2.sqrt(), 0.0);
    Ok(CVec::from_fn(h_hat.len(), |i, _| {
        h_hat[i] * keep + complex_gaussian(rng) * err
    }))
}

/// Entrywise version of [`compose_true_channel`] for PU matrices.
pub fn compose_true_matrix(
    m_hat: &CMat,
    sigma2: f64,
    rng: &mut (impl Rng + ?Sized),
) -> Result<CMat> {
    if !(0.0..=1.0).contains(&sigma2) {
        return Err(Error::Precondition(format!(
            "error variance {sigma2} outside [0, 1]"
        )));
    }
    let keep = Complex64::new((1.0 - sigma2).sqrt(), 0.0);
    let err = Complex64::new(sigma2.sqrt(), 0.0);
    Ok(CMat::from_fn(m_hat.nrows(), m_hat.ncols(), |i, j| {
        m_hat[(i, j)] * keep + complex_gaussian(rng) * err
    }))
}

/// Sample covariance `(1/S) sum g g^H`; Hermitian PSD by construction.
pub fn estimate_covariance(samples: &[CVec]) -> Result<CMat> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Precondition("covariance needs at least one sample".into()))?;
    let n = first.len();
    let mut acc = CMat::zeros(n, n);
    for g in samples {
        if g.len() != n {
            return Err(Error::Dimension(format!(
                "covariance sample length {} != {}",
                g.len(),
                n
            )));
        }
        acc += g * g.adjoint();
    }
    acc /= Complex64::new(samples.len() as f64, 0.0);
    // exact Hermitian diagonal
    for i in 0..n {
        acc[(i, i)] = Complex64::new(acc[(i, i)].re, 0.0);
    }
    Ok(acc)
}

/// `count` i.i.d. conditional draws of the true channel given an estimate.
pub fn conditional_samples(
    h_hat: &CVec,
    sigma2: f64,
    count: usize,
    rng: &mut (impl Rng + ?Sized),
) -> Result<Vec<CVec>> {
    if count == 0 {
        return Err(Error::Precondition("sample count must be >= 1".into()));
    }
    (0..count)
        .map(|_| compose_true_channel(h_hat, sigma2, rng))
        .collect()
}

/// Dedicated SAA stream for user `k`, subcarrier `n`; shared by the solver
/// and the rate report so both average over identical draws.
pub fn saa_stream(seed: u64, user: usize, subcarrier: usize) -> ChaCha12Rng {
    substream(
        seed,
        StreamKind::Saa,
        ((user as u64) << 24) | subcarrier as u64,
    )
}

/// Generate all channels of one realization. `realization` feeds the channel
/// sub-stream index so realizations can be produced independently.
pub fn generate_channel_set(
    cfg: &ScenarioConfig,
    realization: u64,
) -> Result<ChannelSet> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, StreamKind::Channels, realization);
    let nt = cfg.nt;
    let n = cfg.num_subcarriers;
    let taps = cfg.num_taps();
    // Exponential power-delay profile: tap spacing 1/B, RMS spread from cfg.
    let decay = 1.0 / (cfg.delay_spread * cfg.bandwidth());
    let sigma_ie2 = cfg.sigma_ie2();
    let sigma_pe2 = cfg.sigma_pe2();

    let mut su_est = Vec::with_capacity(cfg.num_su);
    let mut su_true = Vec::with_capacity(cfg.num_su);
    for _ in 0..cfg.num_su {
        let geo = TapGeometry::draw(nt, taps, decay, &mut rng);
        let est = geo.realize(n, &mut rng);
        let truth = est
            .iter()
            .map(|h| compose_true_channel(h, sigma_ie2, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        su_est.push(est);
        su_true.push(truth);
    }

    let mut pu_est = Vec::with_capacity(cfg.num_pu);
    let mut pu_true = Vec::with_capacity(cfg.num_pu);
    for m in 0..cfg.num_pu {
        let nr = cfg.pu_rx_antennas[m];
        let geo = TapGeometry::draw(nt, taps, decay, &mut rng);
        // one tapped-delay-line column per receive antenna, shared geometry
        let columns: Vec<Vec<CVec>> = (0..nr).map(|_| geo.realize(n, &mut rng)).collect();
        let mut est = Vec::with_capacity(n);
        let mut truth = Vec::with_capacity(n);
        for sc in 0..n {
            let m_hat = CMat::from_fn(nt, nr, |i, r| columns[r][sc][i]);
            let m_true = compose_true_matrix(&m_hat, sigma_pe2, &mut rng)?;
            est.push(m_hat);
            truth.push(m_true);
        }
        pu_est.push(est);
        pu_true.push(truth);
    }

    let mut au_true = Vec::with_capacity(cfg.num_au);
    let mut au_cov = Vec::with_capacity(cfg.num_au);
    for _ in 0..cfg.num_au {
        let geo = TapGeometry::draw(nt, taps, decay, &mut rng);
        let truth = geo.realize(n, &mut rng);
        // covariance from independent realizations of the same geometry
        let redraws: Vec<Vec<CVec>> = (0..COVARIANCE_SAMPLES)
            .map(|_| geo.realize(n, &mut rng))
            .collect();
        let mut cov = Vec::with_capacity(n);
        for sc in 0..n {
            let slice: Vec<CVec> = redraws.iter().map(|r| r[sc].clone()).collect();
            cov.push(estimate_covariance(&slice)?);
        }
        au_true.push(truth);
        au_cov.push(cov);
    }

    Ok(ChannelSet {
        su_true,
        su_est,
        sigma_ie2,
        pu_true,
        pu_est,
        sigma_pe2,
        au_true,
        au_cov,
    })
}

impl ChannelSet {
    /// Check the covariance invariants (Hermitian within 1e-12, eigenvalues
    /// above -1e-10).
    pub fn validate_covariances(&self) -> Result<()> {
        for per_sc in &self.au_cov {
            for r in per_sc {
                crate::linalg::require_hermitian(r, 1e-12 * r.norm().max(1.0))?;
                let eig = crate::conic::hermitian_eig(r)?;
                let min = *eig.values.last().unwrap();
                if min < -1e-10 {
                    return Err(Error::NotPsd(min));
                }
            }
        }
        Ok(())
    }
}

// Binary cache: little-endian f64 dump with a short header keyed by seed.
mod cache {
    use super::*;
    use std::io::{Read, Write};

    const MAGIC: &[u8; 8] = b"RSJCHAN1";

    fn write_cvec(out: &mut Vec<u8>, v: &CVec) {
        out.extend_from_slice(&(v.len() as u64).to_le_bytes());
        for z in v.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }

    fn write_cmat(out: &mut Vec<u8>, m: &CMat) {
        out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
        for z in m.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }

    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        fn u64(&mut self) -> Result<u64> {
            let bytes: [u8; 8] = self
                .buf
                .get(self.pos..self.pos + 8)
                .ok_or_else(|| Error::Numerical("truncated channel cache".into()))?
                .try_into()
                .unwrap();
            self.pos += 8;
            Ok(u64::from_le_bytes(bytes))
        }

        fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_bits(self.u64()?))
        }

        fn cvec(&mut self) -> Result<CVec> {
            let n = self.u64()? as usize;
            let mut v = CVec::zeros(n);
            for i in 0..n {
                let re = self.f64()?;
                let im = self.f64()?;
                v[i] = Complex64::new(re, im);
            }
            Ok(v)
        }

        fn cmat(&mut self) -> Result<CMat> {
            let rows = self.u64()? as usize;
            let cols = self.u64()? as usize;
            let mut m = CMat::zeros(rows, cols);
            for j in 0..cols {
                for i in 0..rows {
                    let re = self.f64()?;
                    let im = self.f64()?;
                    m[(i, j)] = Complex64::new(re, im);
                }
            }
            Ok(m)
        }
    }

    impl ChannelSet {
        /// Serialize to the binary cache format keyed by `seed`.
        pub fn save_cache(&self, path: &std::path::Path, seed: u64) -> Result<()> {
            let mut out = Vec::new();
            out.extend_from_slice(MAGIC);
            out.extend_from_slice(&seed.to_le_bytes());
            out.extend_from_slice(&self.sigma_ie2.to_le_bytes());
            out.extend_from_slice(&self.sigma_pe2.to_le_bytes());
            let dims = [
                self.su_true.len() as u64,
                self.pu_true.len() as u64,
                self.au_true.len() as u64,
            ];
            for d in dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            let vec_group = |out: &mut Vec<u8>, group: &Vec<Vec<CVec>>| {
                for per_sc in group {
                    out.extend_from_slice(&(per_sc.len() as u64).to_le_bytes());
                    for v in per_sc {
                        write_cvec(out, v);
                    }
                }
            };
            let mat_group = |out: &mut Vec<u8>, group: &Vec<Vec<CMat>>| {
                for per_sc in group {
                    out.extend_from_slice(&(per_sc.len() as u64).to_le_bytes());
                    for m in per_sc {
                        write_cmat(out, m);
                    }
                }
            };
            vec_group(&mut out, &self.su_true);
            vec_group(&mut out, &self.su_est);
            mat_group(&mut out, &self.pu_true);
            mat_group(&mut out, &self.pu_est);
            vec_group(&mut out, &self.au_true);
            mat_group(&mut out, &self.au_cov);
            let mut file = std::fs::File::create(path)?;
            file.write_all(&out)?;
            Ok(())
        }

        /// Load from the binary cache, checking the seed key.
        pub fn load_cache(path: &std::path::Path, seed: u64) -> Result<ChannelSet> {
            let mut buf = Vec::new();
            std::fs::File::open(path)?.read_to_end(&mut buf)?;
            if buf.len() < 8 || &buf[..8] != MAGIC {
                return Err(Error::Numerical("not a channel cache file".into()));
            }
            let mut r = Reader { buf: &buf, pos: 8 };
            let file_seed = r.u64()?;
            if file_seed != seed {
                return Err(Error::Config(format!(
                    "channel cache seed {file_seed} does not match requested {seed}"
                )));
            }
            let sigma_ie2 = r.f64()?;
            let sigma_pe2 = r.f64()?;
            let k = r.u64()? as usize;
            let m = r.u64()? as usize;
            let l = r.u64()? as usize;
            let vec_group = |r: &mut Reader, count: usize| -> Result<Vec<Vec<CVec>>> {
                (0..count)
                    .map(|_| {
                        let n = r.u64()? as usize;
                        (0..n).map(|_| r.cvec()).collect()
                    })
                    .collect()
            };
            let su_true = vec_group(&mut r, k)?;
            let su_est = vec_group(&mut r, k)?;
            let mat_group = |r: &mut Reader, count: usize| -> Result<Vec<Vec<CMat>>> {
                (0..count)
                    .map(|_| {
                        let n = r.u64()? as usize;
                        (0..n).map(|_| r.cmat()).collect()
                    })
                    .collect()
            };
            let pu_true = mat_group(&mut r, m)?;
            let pu_est = mat_group(&mut r, m)?;
            let au_true = vec_group(&mut r, l)?;
            let au_cov = mat_group(&mut r, l)?;
            Ok(ChannelSet {
                su_true,
                su_est,
                sigma_ie2,
                pu_true,
                pu_est,
                sigma_pe2,
                au_true,
                au_cov,
            })
        }
    }
}
