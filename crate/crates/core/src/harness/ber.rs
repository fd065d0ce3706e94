//! Uncoded link-level bit-error-rate studies for the adversarial and
//! primary victims under the solved precoders.
//!
//! Both victims run QPSK with unit-power symbols and equal power allocation
//! over all subcarriers of a flat-fading link channel drawn fresh per
//! realization. The adversarial user estimates its channel from pilots whose
//! quality degrades with the focused jamming power; the primary user has
//! perfect receiver-side channel knowledge and only suffers additive
//! interference.

use num_complex::Complex64;
use rand::Rng;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::metrics::PrecoderSet;
use crate::rng::complex_gaussian;

/// Link-level victim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Victim {
    Au,
    Pu,
}

/// Monte-Carlo plan for one BER curve.
#[derive(Debug, Clone)]
pub struct BerSpec {
    /// Total received symbol energies, linear, ascending.
    pub es_grid: Vec<f64>,
    /// Minimum counted bits per grid point.
    pub bits_per_point: usize,
    pub victim: Victim,
}

impl BerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.es_grid.is_empty() {
            return Err(Error::Config("Es grid must be nonempty".into()));
        }
        if self.es_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("Es grid must be sorted ascending".into()));
        }
        if self.es_grid.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config("Es values must be positive".into()));
        }
        if self.bits_per_point == 0 {
            return Err(Error::Config("bits_per_point must be >= 1".into()));
        }
        Ok(())
    }
}

/// Test hooks: pin the link channel or the estimation error.
#[derive(Debug, Clone, Copy, Default)]
pub struct BerOverrides {
    pub fixed_channel: Option<Complex64>,
    /// Forces the AU estimation error standard deviation.
    pub force_sigma: Option<f64>,
}

/// One point of a BER curve.
#[derive(Debug, Clone)]
pub struct BerPoint {
    pub es: f64,
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    /// Binomial standard error of the estimate.
    pub std_error: f64,
}

fn qpsk_symbol<R: Rng + ?Sized>(rng: &mut R) -> (Complex64, [bool; 2]) {
    let b0 = rng.random::<bool>();
    let b1 = rng.random::<bool>();
    let re = if b0 { 1.0 } else { -1.0 } * std::f64::consts::FRAC_1_SQRT_2;
    let im = if b1 { 1.0 } else { -1.0 } * std::f64::consts::FRAC_1_SQRT_2;
    (Complex64::new(re, im), [b0, b1])
}

fn qpsk_errors(decided: Complex64, bits: [bool; 2]) -> usize {
    let mut errors = 0;
    if (decided.re > 0.0) != bits[0] {
        errors += 1;
    }
    if (decided.im > 0.0) != bits[1] {
        errors += 1;
    }
    errors
}

/// Focused power per subcarrier through a fixed victim channel:
/// `|g^H p_c|^2 + sum_k |g^H p_k|^2 + sum_l |g^H f_l|^2`.
pub fn focused_power_profile(victim_channel: &[CVec], precoders: &PrecoderSet) -> Vec<f64> {
    (0..precoders.num_subcarriers())
        .map(|sc| {
            let g = &victim_channel[sc];
            let slice = precoders.slice(sc);
            let mut acc = (g.adjoint() * slice.common)[(0, 0)].norm_sqr();
            for p in &slice.private {
                acc += (g.adjoint() * *p)[(0, 0)].norm_sqr();
            }
            for f in &slice.jamming {
                acc += (g.adjoint() * *f)[(0, 0)].norm_sqr();
            }
            acc
        })
        .collect()
}

/// BER of the adversarial link under the given per-subcarrier focused
/// power. Channel estimation runs over the pilot set; the estimate quality
/// follows the mean pilot SINR power law, clamped to keep the composition
/// real.
pub fn ber_au<R: Rng + ?Sized>(
    spec: &BerSpec,
    focused: &[f64],
    pilot_set: &[usize],
    cfg: &ScenarioConfig,
    rng: &mut R,
    overrides: BerOverrides,
) -> Result<Vec<BerPoint>> {
    spec.validate()?;
    if pilot_set.is_empty() {
        return Err(Error::Config("AU pilot set must be nonempty".into()));
    }
    let n = cfg.num_subcarriers;
    let n0 = cfg.noise_power;
    let mut out = Vec::with_capacity(spec.es_grid.len());

    for &es in &spec.es_grid {
        let per_sc_energy = es / n as f64;
        let mut bits = 0usize;
        let mut errors = 0usize;
        while bits < spec.bits_per_point {
            let h = overrides
                .fixed_channel
                .unwrap_or_else(|| complex_gaussian(rng));
            // estimation quality from the mean pilot SINR
            let sigma = overrides.force_sigma.unwrap_or_else(|| {
                let mean_sinr = pilot_set
                    .iter()
                    .map(|&sc| h.norm_sqr() * per_sc_energy / (n0 + focused[sc]))
                    .sum::<f64>()
                    / pilot_set.len() as f64;
                mean_sinr.powf(-0.6).min(1.0)
            });
            let sigma2 = (sigma * sigma).min(1.0);
            let h_est = h * Complex64::new((1.0 - sigma2).sqrt(), 0.0)
                + complex_gaussian(rng) * Complex64::new(sigma2.sqrt(), 0.0);

            for sc in 0..n {
                let (x, tx_bits) = qpsk_symbol(rng);
                let noise = complex_gaussian(rng) * Complex64::new(n0.sqrt(), 0.0);
                let jam = complex_gaussian(rng) * Complex64::new(focused[sc].sqrt(), 0.0);
                let y = h * Complex64::new(per_sc_energy.sqrt(), 0.0) * x + noise + jam;
                let decided = if h_est.norm() > 1e-300 {
                    y / h_est
                } else {
                    y
                };
                errors += qpsk_errors(decided, tx_bits);
                bits += 2;
            }
        }
        let ber = errors as f64 / bits as f64;
        out.push(BerPoint {
            es,
            bits,
            errors,
            ber,
            std_error: (ber * (1.0 - ber) / bits as f64).sqrt(),
        });
    }
    Ok(out)
}

/// BER of the primary link with perfect receiver CSI and additive
/// interference of the given per-subcarrier power.
pub fn ber_pu<R: Rng + ?Sized>(
    spec: &BerSpec,
    interference: &[f64],
    cfg: &ScenarioConfig,
    rng: &mut R,
    overrides: BerOverrides,
) -> Result<Vec<BerPoint>> {
    spec.validate()?;
    let n = cfg.num_subcarriers;
    let n0 = cfg.noise_power;
    let mut out = Vec::with_capacity(spec.es_grid.len());

    for &es in &spec.es_grid {
        let per_sc_energy = es / n as f64;
        let mut bits = 0usize;
        let mut errors = 0usize;
        while bits < spec.bits_per_point {
            let h = overrides
                .fixed_channel
                .unwrap_or_else(|| complex_gaussian(rng));
            for sc in 0..n {
                let (x, tx_bits) = qpsk_symbol(rng);
                let noise = complex_gaussian(rng) * Complex64::new(n0.sqrt(), 0.0);
                let interf =
                    complex_gaussian(rng) * Complex64::new(interference[sc].sqrt(), 0.0);
                let y = h * Complex64::new(per_sc_energy.sqrt(), 0.0) * x + noise + interf;
                let decided = if h.norm() > 1e-300 { y / h } else { y };
                errors += qpsk_errors(decided, tx_bits);
                bits += 2;
            }
        }
        let ber = errors as f64 / bits as f64;
        out.push(BerPoint {
            es,
            bits,
            errors,
            ber,
            std_error: (ber * (1.0 - ber) / bits as f64).sqrt(),
        });
    }
    Ok(out)
}

/// BER curves CSV: one row per (mode, Es).
pub fn ber_to_csv(curves: &[(&str, &[BerPoint])]) -> String {
    let mut out = String::from("mode,es,es_db,bits,errors,ber,std_error\n");
    for (mode, points) in curves {
        for p in *points {
            out.push_str(&format!(
                "{},{:.12e},{:.6},{},{},{:.12e},{:.12e}\n",
                mode,
                p.es,
                10.0 * p.es.log10(),
                p.bits,
                p.errors,
                p.ber,
                p.std_error
            ));
        }
    }
    out
}
