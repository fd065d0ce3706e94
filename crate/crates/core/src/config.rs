//! Scenario configuration.
//!
//! The JSON document mirrors the field names below one-to-one; subcarrier
//! indices in `Sp` are 1-based in the file and converted on access.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiple-access scheme at the secondary transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Common stream plus one private stream per user.
    RSMA,
    /// Private streams only; the common precoder and rate shares are off.
    SDMA,
    /// Two users: one message rides the common stream, the other stays
    /// private. Both decode orders are solved and the better one is kept.
    NOMA,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::RSMA => write!(f, "RSMA"),
            Scheme::SDMA => write!(f, "SDMA"),
            Scheme::NOMA => write!(f, "NOMA"),
        }
    }
}

/// All static parameters of one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Transmit antennas at the secondary transmitter.
    #[serde(rename = "Nt")]
    pub nt: usize,
    /// Served secondary users (single antenna each).
    #[serde(rename = "K")]
    pub num_su: usize,
    /// Adversarial users whose pilots are jammed.
    #[serde(rename = "L")]
    pub num_au: usize,
    /// Protected primary users.
    #[serde(rename = "M")]
    pub num_pu: usize,
    /// Receive antennas per primary user, length `M`.
    #[serde(rename = "Nr")]
    pub pu_rx_antennas: Vec<usize>,
    /// Subcarriers in the signal band.
    #[serde(rename = "N")]
    pub num_subcarriers: usize,
    /// Pilot subcarriers per adversarial user, 1-based indices, length `L`.
    #[serde(rename = "Sp")]
    pub pilot_sets: Vec<Vec<usize>>,
    /// Total transmit power budget over all subcarriers, Watts.
    #[serde(rename = "Pt_bar")]
    pub total_power: f64,
    /// Noise variance per subcarrier, Watts.
    #[serde(rename = "N0")]
    pub noise_power: f64,
    /// CSIT quality exponent for served and primary users.
    pub alpha_i: f64,
    pub alpha_p: f64,
    /// Jamming strictness in [0, 1].
    pub rho: f64,
    /// Interference relaxation floor, Watts.
    pub mu: f64,
    /// Per-user rate floor, bits/s/Hz.
    #[serde(rename = "Rth")]
    pub rate_floor: f64,
    pub scheme: Scheme,
    /// RMS delay spread of the channel, seconds.
    pub delay_spread: f64,
    /// Subcarrier spacing, Hz.
    pub subcarrier_spacing: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Signal band width in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Tap count of the synthetic tapped-delay-line channel.
    pub fn num_taps(&self) -> usize {
        (6.0 * self.delay_spread * self.bandwidth()).ceil().max(1.0) as usize
    }

    /// Linear transmit SNR `Pt_bar / (N0 N)`.
    pub fn snr(&self) -> f64 {
        self.total_power / (self.noise_power * self.num_subcarriers as f64)
    }

    /// Estimation error variance of the served-user channels.
    ///
    /// The `SNR^(-alpha)` law exceeds one below 0 dB, so it is clamped to
    /// keep `sqrt(1 - sigma^2)` real.
    pub fn sigma_ie2(&self) -> f64 {
        self.snr().powf(-self.alpha_i).min(1.0)
    }

    /// Estimation error variance of the primary-user channels.
    pub fn sigma_pe2(&self) -> f64 {
        self.snr().powf(-self.alpha_p).min(1.0)
    }

    /// Pilot set of adversarial user `l` as 0-based indices, sorted.
    pub fn pilot_set_zero_based(&self, l: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.pilot_sets[l].iter().map(|&n| n - 1).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Number of pilot subcarriers of adversarial user `l`.
    pub fn num_pilots(&self, l: usize) -> usize {
        self.pilot_set_zero_based(l).len()
    }

    /// True when any adversarial user has subcarrier `n` (0-based) as pilot.
    pub fn is_pilot_subcarrier(&self, n: usize) -> bool {
        (0..self.num_au).any(|l| self.pilot_set_zero_based(l).contains(&n))
    }

    /// Barrage-jamming variant: every subcarrier becomes a pilot subcarrier
    /// of every adversarial user. Thresholds, masks and the link-level
    /// estimator all follow from the pilot sets, so this transform is the
    /// entire difference between pilot and barrage modes.
    pub fn barrage(&self) -> ScenarioConfig {
        let mut cfg = self.clone();
        cfg.pilot_sets = vec![(1..=self.num_subcarriers).collect(); self.num_au];
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt < 1 {
            return Err(Error::Config("Nt must be >= 1".into()));
        }
        if self.num_su < 1 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if self.num_subcarriers < 1 {
            return Err(Error::Config("N must be >= 1".into()));
        }
        if self.pu_rx_antennas.len() != self.num_pu {
            return Err(Error::Config(format!(
                "Nr has {} entries but M = {}",
                self.pu_rx_antennas.len(),
                self.num_pu
            )));
        }
        if self.pu_rx_antennas.iter().any(|&nr| nr == 0) {
            return Err(Error::Config("every Nr entry must be >= 1".into()));
        }
        if self.pilot_sets.len() != self.num_au {
            return Err(Error::Config(format!(
                "Sp has {} entries but L = {}",
                self.pilot_sets.len(),
                self.num_au
            )));
        }
        for (l, sp) in self.pilot_sets.iter().enumerate() {
            if sp.is_empty() {
                return Err(Error::Config(format!("Sp[{l}] is empty")));
            }
            if sp.iter().any(|&n| n == 0 || n > self.num_subcarriers) {
                return Err(Error::Config(format!(
                    "Sp[{l}] contains an index outside 1..={}",
                    self.num_subcarriers
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config("rho must lie in [0, 1]".into()));
        }
        if self.total_power < 0.0 || self.mu < 0.0 || self.rate_floor < 0.0 {
            return Err(Error::Config("powers and rate floor must be >= 0".into()));
        }
        if self.noise_power <= 0.0 {
            return Err(Error::Config("N0 must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha_i) || !(0.0..=1.0).contains(&self.alpha_p) {
            return Err(Error::Config("alpha_i, alpha_p must lie in [0, 1]".into()));
        }
        if self.delay_spread <= 0.0 || self.subcarrier_spacing <= 0.0 {
            return Err(Error::Config(
                "delay_spread and subcarrier_spacing must be > 0".into(),
            ));
        }
        if self.num_taps() > self.num_subcarriers {
            return Err(Error::Config(format!(
                "delay spread implies {} taps which exceeds N = {}",
                self.num_taps(),
                self.num_subcarriers
            )));
        }
        if self.scheme == Scheme::NOMA && self.num_su != 2 {
            return Err(Error::Config("NOMA requires exactly K = 2 users".into()));
        }
        Ok(())
    }

    /// Parse and validate a configuration from a JSON string.
    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn demo_config() -> ScenarioConfig {
        ScenarioConfig {
            nt: 4,
            num_su: 2,
            num_au: 1,
            num_pu: 1,
            pu_rx_antennas: vec![2],
            num_subcarriers: 32,
            pilot_sets: vec![vec![1, 5, 9, 13, 17, 21, 25, 29]],
            total_power: 100.0,
            noise_power: 1.0 / 32.0,
            alpha_i: 0.6,
            alpha_p: 0.6,
            rho: 0.45,
            mu: 0.125,
            rate_floor: 0.0,
            scheme: Scheme::RSMA,
            delay_spread: 1.2e-6,
            subcarrier_spacing: 60e3,
            seed: 1,
        }
    }

    #[test]
    fn snr_and_error_variances_follow_the_power_law() {
        let cfg = demo_config();
        assert!((cfg.snr() - 100.0).abs() < 1e-12);
        assert!((cfg.sigma_ie2() - 100f64.powf(-0.6)).abs() < 1e-15);
        assert!((cfg.sigma_ie2() - 0.0631).abs() < 1e-3);
    }

    #[test]
    fn zero_alpha_clamps_error_variance_to_one() {
        let mut cfg = demo_config();
        cfg.alpha_i = 0.0;
        assert_eq!(cfg.sigma_ie2(), 1.0);
    }

    #[test]
    fn tap_count_matches_delay_spread() {
        let cfg = demo_config();
        // 6 * 1.2us * 1.92 MHz = 13.824 -> 14 taps
        assert_eq!(cfg.num_taps(), 14);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn excessive_delay_spread_is_rejected() {
        let mut cfg = demo_config();
        cfg.delay_spread = 1e-3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip_preserves_field_names() {
        let cfg = demo_config();
        let text = cfg.to_json_pretty();
        assert!(text.contains("\"Nt\""));
        assert!(text.contains("\"Pt_bar\""));
        assert!(text.contains("\"Sp\""));
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(back.nt, cfg.nt);
        assert_eq!(back.pilot_sets, cfg.pilot_sets);
    }

    #[test]
    fn barrage_covers_all_subcarriers() {
        let cfg = demo_config().barrage();
        assert_eq!(cfg.num_pilots(0), 32);
        assert!(cfg.is_pilot_subcarrier(2));
    }

    #[test]
    fn noma_requires_two_users() {
        let mut cfg = demo_config();
        cfg.scheme = Scheme::NOMA;
        assert!(cfg.validate().is_ok());
        cfg.num_su = 3;
        assert!(cfg.validate().is_err());
    }
}
