//! Shared domain types: protocol parameters, attack strategy knobs, detector
//! statistics, and dB/transmission conversions.
//!
//! Everything here is immutable after construction and freely shareable
//! across threads. Physical parameters enter through [`ConfigInput::validate`],
//! which rejects out-of-range values and derives the beam-splitter
//! transmissivity as exactly `1 - reflectivity`.

use thiserror::Error;

/// Photon polarization. The protocol uses exactly two orthogonal states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    /// The orthogonal polarization; an involution.
    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// Which of the legitimate detectors resolve the polarization of incoming
/// light (polarizing beam splitter + one APD per output).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Discrimination {
    /// No detector distinguishes polarizations.
    None,
    /// D0, D1 and D2 all distinguish polarizations.
    All,
    /// Only D1 and D2 distinguish polarizations.
    D1D2,
    /// Only D0 and D2 distinguish polarizations.
    D0D2,
}

/// Eavesdropping strategy selector.
///
/// The four `Combined*` variants pair the channel measurement with blinding
/// and faked states, one variant per [`Discrimination`] setting. `Baseline`
/// is the eavesdropper-free exchange and `BlindReduceLosses` the pure
/// blinding attack over an improved channel; those two have no closed-form
/// attack statistics here and are handled by the Monte Carlo engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackScenario {
    Baseline,
    BlindReduceLosses,
    CombinedNoDisc,
    CombinedFullDisc,
    CombinedD1D2,
    CombinedD0D2,
}

impl AttackScenario {
    /// True for the four combined blinding/measurement variants.
    pub fn is_combined(self) -> bool {
        self.required_discrimination().is_some()
    }

    /// The discrimination setting a combined variant is built against.
    pub fn required_discrimination(self) -> Option<Discrimination> {
        match self {
            AttackScenario::CombinedNoDisc => Some(Discrimination::None),
            AttackScenario::CombinedFullDisc => Some(Discrimination::All),
            AttackScenario::CombinedD1D2 => Some(Discrimination::D1D2),
            AttackScenario::CombinedD0D2 => Some(Discrimination::D0D2),
            AttackScenario::Baseline | AttackScenario::BlindReduceLosses => None,
        }
    }

    /// Checks that a combined variant matches the config's detector layout.
    /// `Baseline` and `BlindReduceLosses` pass for any config.
    pub fn check_discrimination(self, cfg: &ProtocolConfig) -> Result<(), ConfigError> {
        match self.required_discrimination() {
            Some(required) if required != cfg.discrimination() => {
                Err(ConfigError::ScenarioMismatch {
                    scenario: self,
                    required,
                    actual: cfg.discrimination(),
                })
            }
            _ => Ok(()),
        }
    }
}

/// Validation failure for physical parameters or strategy knobs.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(
        "eve_channel_transmission ({sigma_prime}) must be at least channel_transmission ({sigma})"
    )]
    EveChannelBelowChannel { sigma_prime: f64, sigma: f64 },
    #[error("scenario {scenario:?} requires discrimination {required:?}, but the config uses {actual:?}")]
    ScenarioMismatch {
        scenario: AttackScenario,
        required: Discrimination,
        actual: Discrimination,
    },
}

fn check_unit_interval(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            requirement: "in [0, 1]",
            value,
        })
    }
}

fn check_transmission(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if value.is_finite() && value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            field,
            requirement: "in (0, 1]",
            value,
        })
    }
}

/// Unvalidated protocol parameters, as read from a config file or assembled
/// in code. [`ConfigInput::validate`] turns them into a [`ProtocolConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigInput {
    /// Mean photon number of the source, μ = |α|².
    pub mean_photon_number: f64,
    /// Beam-splitter reflectivity R; the transmissivity is derived as 1 − R.
    pub reflectivity: f64,
    /// One-way channel power transmission σ.
    pub channel_transmission: f64,
    /// One-way transmission σ′ of the eavesdropper's improved channel, σ ≤ σ′.
    pub eve_channel_transmission: f64,
    pub eta_d0: f64,
    pub eta_d1: f64,
    pub eta_d2: f64,
    pub eta_eve: f64,
    pub discrimination: Discrimination,
}

impl Default for ConfigInput {
    /// The typical scenario: μ = 0.1, R = 0.5, σ = 0.1 (a 10 dB link),
    /// σ′ = 1.2σ, all detector efficiencies 0.1, no polarization
    /// discrimination.
    fn default() -> Self {
        ConfigInput {
            mean_photon_number: 0.1,
            reflectivity: 0.5,
            channel_transmission: 0.1,
            eve_channel_transmission: 0.12,
            eta_d0: 0.1,
            eta_d1: 0.1,
            eta_d2: 0.1,
            eta_eve: 0.1,
            discrimination: Discrimination::None,
        }
    }
}

impl ConfigInput {
    /// Validates every field and returns the immutable config.
    pub fn validate(self) -> Result<ProtocolConfig, ConfigError> {
        let mu = self.mean_photon_number;
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(ConfigError::OutOfRange {
                field: "mean_photon_number",
                requirement: "finite and >= 0",
                value: mu,
            });
        }
        check_unit_interval("reflectivity", self.reflectivity)?;
        check_transmission("channel_transmission", self.channel_transmission)?;
        check_transmission("eve_channel_transmission", self.eve_channel_transmission)?;
        if self.eve_channel_transmission < self.channel_transmission {
            return Err(ConfigError::EveChannelBelowChannel {
                sigma_prime: self.eve_channel_transmission,
                sigma: self.channel_transmission,
            });
        }
        check_unit_interval("eta_d0", self.eta_d0)?;
        check_unit_interval("eta_d1", self.eta_d1)?;
        check_unit_interval("eta_d2", self.eta_d2)?;
        check_unit_interval("eta_eve", self.eta_eve)?;
        Ok(ProtocolConfig {
            mean_photon_number: mu,
            reflectivity: self.reflectivity,
            transmissivity: 1.0 - self.reflectivity,
            channel_transmission: self.channel_transmission,
            eve_channel_transmission: self.eve_channel_transmission,
            eta_d0: self.eta_d0,
            eta_d1: self.eta_d1,
            eta_d2: self.eta_d2,
            eta_eve: self.eta_eve,
            discrimination: self.discrimination,
        })
    }
}

/// Validated physical parameters of one Alice/Bob/channel instance.
///
/// Immutable; `reflectivity + transmissivity == 1` holds exactly because the
/// transmissivity is stored as `1 - reflectivity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    mean_photon_number: f64,
    reflectivity: f64,
    transmissivity: f64,
    channel_transmission: f64,
    eve_channel_transmission: f64,
    eta_d0: f64,
    eta_d1: f64,
    eta_d2: f64,
    eta_eve: f64,
    discrimination: Discrimination,
}

impl ProtocolConfig {
    pub fn mean_photon_number(&self) -> f64 {
        self.mean_photon_number
    }
    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }
    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }
    pub fn channel_transmission(&self) -> f64 {
        self.channel_transmission
    }
    pub fn eve_channel_transmission(&self) -> f64 {
        self.eve_channel_transmission
    }
    pub fn eta_d0(&self) -> f64 {
        self.eta_d0
    }
    pub fn eta_d1(&self) -> f64 {
        self.eta_d1
    }
    pub fn eta_d2(&self) -> f64 {
        self.eta_d2
    }
    pub fn eta_eve(&self) -> f64 {
        self.eta_eve
    }
    pub fn discrimination(&self) -> Discrimination {
        self.discrimination
    }

    /// Same instance with a perturbed channel transmission. Used by the
    /// loss-fluctuation search; the perturbed value may only shrink, so the
    /// σ ≤ σ′ ordering is preserved.
    pub(crate) fn with_channel_transmission(&self, sigma: f64) -> ProtocolConfig {
        debug_assert!(sigma > 0.0 && sigma <= self.channel_transmission);
        ProtocolConfig {
            channel_transmission: sigma,
            ..*self
        }
    }
}

/// Eve's tunable strategy knobs, all probabilities in [0, 1].
///
/// `z` only matters for [`AttackScenario::CombinedNoDisc`] and `z0` only for
/// [`AttackScenario::CombinedD0D2`]; unused knobs carry 0 and are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    /// Probability that Eve measures the channel pulse.
    pub x: f64,
    /// Forced-click probability in the perfect-information branch.
    pub y: f64,
    /// Faked-state probability after a zero-photon measurement.
    pub z: f64,
    /// Selective D0 forced-click probability (D0/D2 discrimination only).
    pub z0: f64,
}

impl AttackParams {
    pub fn new(x: f64, y: f64, z: f64, z0: f64) -> Result<Self, ConfigError> {
        let params = AttackParams { x, y, z, z0 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_unit_interval("x", self.x)?;
        check_unit_interval("y", self.y)?;
        check_unit_interval("z", self.z)?;
        check_unit_interval("z0", self.z0)
    }
}

/// The four per-pulse click probabilities.
///
/// Each value already folds in the 1/2 probability of the corresponding
/// polarization branch (same choice for `p_d0`/`p_d1`/`p_d2`, different
/// choice for `p_d0_opp`), so `p_d1` and `p_d2` can never exceed 1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStats {
    /// D0 click probability on same-polarization pulses.
    pub p_d0: f64,
    /// D1 click probability (same-polarization pulses; the key rate).
    pub p_d1: f64,
    /// D2 click probability (same-polarization pulses).
    pub p_d2: f64,
    /// D0 click probability on different-polarization pulses.
    pub p_d0_opp: f64,
}

/// Attack-to-baseline ratios of the four statistics and their worst
/// deviation from the ideal ratio of 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    pub r_d0: f64,
    pub r_d1: f64,
    pub r_d2: f64,
    pub r_d0_opp: f64,
    /// `max(|r_d0 - 1|, |r_d1 - 1|, |r_d2 - 1|, |r_d0_opp - 1|)`.
    pub max_deviation: f64,
}

impl RatioReport {
    pub(crate) fn from_ratios(r_d0: f64, r_d1: f64, r_d2: f64, r_d0_opp: f64) -> Self {
        let max_deviation = (r_d0 - 1.0)
            .abs()
            .max((r_d1 - 1.0).abs())
            .max((r_d2 - 1.0).abs())
            .max((r_d0_opp - 1.0).abs());
        RatioReport {
            r_d0,
            r_d1,
            r_d2,
            r_d0_opp,
            max_deviation,
        }
    }
}

/// Converts a loss figure in dB to a power transmission in (0, 1].
pub fn transmission_from_db(loss_db: f64) -> Result<f64, ConfigError> {
    if !(loss_db.is_finite() && loss_db >= 0.0) {
        return Err(ConfigError::OutOfRange {
            field: "loss_db",
            requirement: "finite and >= 0",
            value: loss_db,
        });
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Converts a power transmission in (0, 1] back to a loss figure in dB.
/// Inverse of [`transmission_from_db`].
pub fn db_from_transmission(transmission: f64) -> Result<f64, ConfigError> {
    check_transmission("transmission", transmission)?;
    Ok(-10.0 * transmission.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn orthogonal_is_an_involution() {
        for p in [Polarization::H, Polarization::V] {
            assert_ne!(p.orthogonal(), p);
            assert_eq!(p.orthogonal().orthogonal(), p);
        }
    }

    #[test]
    fn db_conversion_reference_points() {
        // 50 km of standard fiber at 0.2 dB/km.
        assert_relative_eq!(
            transmission_from_db(10.0).unwrap(),
            0.1,
            max_relative = 1e-12
        );
        assert_eq!(transmission_from_db(0.0).unwrap(), 1.0);
        // 10^(-0.30103), frozen from a high-precision evaluation.
        let half_ish = transmission_from_db(3.0103).unwrap();
        assert_relative_eq!(half_ish, 0.4999999950079739, max_relative = 1e-12);
        assert_abs_diff_eq!(half_ish, 0.5, epsilon = 1e-5);
    }

    #[test]
    fn db_conversion_rejects_bad_input() {
        assert!(transmission_from_db(-0.1).is_err());
        assert!(transmission_from_db(f64::NAN).is_err());
        assert!(transmission_from_db(f64::INFINITY).is_err());
        assert!(db_from_transmission(0.0).is_err());
        assert!(db_from_transmission(1.1).is_err());
    }

    #[test]
    fn db_conversion_round_trips() {
        for i in 0..=600 {
            let loss_db = i as f64 * 0.1;
            let t = transmission_from_db(loss_db).unwrap();
            assert!(t > 0.0 && t <= 1.0);
            assert_abs_diff_eq!(db_from_transmission(t).unwrap(), loss_db, epsilon = 1e-12);
        }
    }

    #[test]
    fn typical_config_validates() {
        let cfg = ConfigInput::default().validate().unwrap();
        assert_eq!(cfg.mean_photon_number(), 0.1);
        assert_eq!(cfg.reflectivity() + cfg.transmissivity(), 1.0);
        assert_eq!(cfg.discrimination(), Discrimination::None);
    }

    #[test]
    fn transmissivity_is_exact_complement() {
        for i in 0..=100 {
            let r = i as f64 / 100.0;
            let cfg = ConfigInput {
                reflectivity: r,
                ..ConfigInput::default()
            }
            .validate()
            .unwrap();
            assert_eq!(cfg.transmissivity(), 1.0 - r);
            assert_eq!(cfg.reflectivity() + cfg.transmissivity(), 1.0);
        }
    }

    #[test]
    fn out_of_range_fields_are_named() {
        let err = ConfigInput {
            reflectivity: 1.3,
            ..ConfigInput::default()
        }
        .validate()
        .unwrap_err();
        match err {
            ConfigError::OutOfRange { field, .. } => assert_eq!(field, "reflectivity"),
            other => panic!("unexpected error: {other:?}"),
        }

        let err = ConfigInput {
            eta_d2: -0.5,
            ..ConfigInput::default()
        }
        .validate()
        .unwrap_err();
        match err {
            ConfigError::OutOfRange { field, .. } => assert_eq!(field, "eta_d2"),
            other => panic!("unexpected error: {other:?}"),
        }

        assert!(ConfigInput {
            channel_transmission: 0.0,
            ..ConfigInput::default()
        }
        .validate()
        .is_err());

        assert!(ConfigInput {
            mean_photon_number: f64::NAN,
            ..ConfigInput::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn eve_channel_must_not_be_worse() {
        let err = ConfigInput {
            channel_transmission: 0.1,
            eve_channel_transmission: 0.05,
            ..ConfigInput::default()
        }
        .validate()
        .unwrap_err();
        assert!(matches!(err, ConfigError::EveChannelBelowChannel { .. }));
    }

    #[test]
    fn vacuum_source_is_a_valid_config() {
        assert!(ConfigInput {
            mean_photon_number: 0.0,
            ..ConfigInput::default()
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn attack_params_are_unit_interval() {
        assert!(AttackParams::new(0.042, 1.0, 0.668, 0.0).is_ok());
        assert!(AttackParams::new(-0.1, 0.0, 0.0, 0.0).is_err());
        assert!(AttackParams::new(0.0, 1.5, 0.0, 0.0).is_err());
        assert!(AttackParams::new(0.0, 0.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn scenario_discrimination_pairing() {
        let nodisc = ConfigInput::default().validate().unwrap();
        let alldisc = ConfigInput {
            discrimination: Discrimination::All,
            ..ConfigInput::default()
        }
        .validate()
        .unwrap();

        assert!(AttackScenario::CombinedNoDisc
            .check_discrimination(&nodisc)
            .is_ok());
        assert!(AttackScenario::CombinedNoDisc
            .check_discrimination(&alldisc)
            .is_err());
        assert!(AttackScenario::CombinedFullDisc
            .check_discrimination(&alldisc)
            .is_ok());
        // Baseline and blind-reduce-losses are layout-agnostic.
        assert!(AttackScenario::Baseline
            .check_discrimination(&alldisc)
            .is_ok());
        assert!(AttackScenario::BlindReduceLosses
            .check_discrimination(&nodisc)
            .is_ok());
        assert!(!AttackScenario::Baseline.is_combined());
        assert!(AttackScenario::CombinedD0D2.is_combined());
    }

    #[test]
    fn ratio_report_max_deviation() {
        let r = RatioReport::from_ratios(1.0, 1.0, 1.0, 1.0);
        assert_eq!(r.max_deviation, 0.0);
        let r = RatioReport::from_ratios(1.01, 0.98, 1.0, 0.995);
        assert_abs_diff_eq!(r.max_deviation, 0.02, epsilon = 1e-15);
    }
}
