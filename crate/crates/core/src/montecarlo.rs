//! Pulse-level stochastic simulation of the N09 exchange: honest runs with
//! single-photon or weak-coherent sources, the blind-and-reduce-losses
//! attack, and the four combined blinding/measurement attacks.
//!
//! The coherent source is modeled mean-field: amplitudes combine linearly at
//! beam splitters (reflection √R, transmission i√T, sign flip on the return
//! from Bob), losses scale the mean photon number, and each binary detector
//! clicks with probability `1 − exp(−η·m)` for the mean `m` it faces — the
//! exact statistics for coherent light. Detector blinding is a behavioral
//! override per detector per pulse: a blinded detector never clicks unless
//! Eve injects a trigger on top of the blinding light (a forced click).
//!
//! Every pulse draws its randomness from a counter-based stream seeded by
//! `(seed, pulse_index)`, so identical inputs reproduce identical records,
//! batches may be processed in any order, and accumulation is a plain
//! integer sum.

use crate::model::{
    AttackParams, AttackScenario, ConfigError, DetectionStats, Polarization, ProtocolConfig,
};
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum SimulationError {
    #[error("pulse count must be at least 1")]
    NoPulses,
    #[error("the single-photon source is only valid for Baseline and BlindReduceLosses runs")]
    SinglePhotonCombined,
    #[error("blind-reduce-losses doubles the one-way transmission, which requires channel_transmission <= 0.5 (got {0})")]
    ChannelTooGood(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Photon source model for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceModel {
    /// Ideal single-photon source; exact interaction-free statistics.
    SinglePhoton,
    /// Weak coherent pulses of mean photon number μ.
    Coherent,
}

/// What Eve did on one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveAction {
    /// Honest channel, no eavesdropper present.
    None,
    /// Blind-and-reduce-losses handling with blinding light in `eve_pol`.
    BlindReduce { eve_pol: Polarization },
    /// Channel measurement that found `photons` photons.
    Measure { photons: u32 },
}

/// Complete trace of one protocol round.
///
/// The blinded flags record whether blinding light suppressed the light that
/// detector would have seen this pulse; a click coincides with a raised flag
/// only when Eve injected a trigger pulse (forced click). `d1_click` and
/// `d2_click` are never both set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseRecord {
    pub alice_pol: Polarization,
    pub bob_pol: Polarization,
    pub eve_action: EveAction,
    pub d0_click: bool,
    pub d1_click: bool,
    pub d2_click: bool,
    pub d0_blinded: bool,
    pub d1_blinded: bool,
    pub d2_blinded: bool,
    pub eve_knows_bob: bool,
    pub eve_knows_alice: bool,
}

impl PulseRecord {
    /// Header of the line-per-pulse export format.
    pub const CSV_HEADER: &'static str = "alice_pol,bob_pol,eve_action,d0_click,d1_click,d2_click,d0_blinded,d1_blinded,d2_blinded,eve_knows_bob,eve_knows_alice";

    /// One comma-separated line, booleans as 0/1, matching [`Self::CSV_HEADER`].
    pub fn csv_line(&self) -> String {
        let pol = |p: Polarization| match p {
            Polarization::H => "H",
            Polarization::V => "V",
        };
        let action = match self.eve_action {
            EveAction::None => "none".to_string(),
            EveAction::BlindReduce { eve_pol } => format!("blind_reduce:{}", pol(eve_pol)),
            EveAction::Measure { photons } => format!("measure:{photons}"),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            pol(self.alice_pol),
            pol(self.bob_pol),
            action,
            u8::from(self.d0_click),
            u8::from(self.d1_click),
            u8::from(self.d2_click),
            u8::from(self.d0_blinded),
            u8::from(self.d1_blinded),
            u8::from(self.d2_blinded),
            u8::from(self.eve_knows_bob),
            u8::from(self.eve_knows_alice),
        )
    }
}

/// Raw click tallies behind the empirical statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClickCounts {
    /// D0 clicks on same-polarization pulses.
    pub d0_same: u64,
    /// D1 clicks (always same-polarization pulses).
    pub d1: u64,
    /// D2 clicks.
    pub d2: u64,
    /// D0 clicks on different-polarization pulses.
    pub d0_opp: u64,
}

/// Aggregate outcome of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSummary {
    pub pulses: u64,
    pub counts: ClickCounts,
    /// Counts divided by the total pulse count, in the same branch
    /// conventions as the closed forms.
    pub empirical: DetectionStats,
    /// Number of pulses on which D1 clicked.
    pub sifted_key_length: u64,
    /// Fraction of sifted bits on which Alice and Bob disagree
    /// (0 when nothing was sifted).
    pub qber: f64,
    /// Fraction of sifted bits Eve reconstructs correctly from her
    /// knowledge ledger (1 when nothing was sifted).
    pub eve_key_recovery: f64,
}

/// Counter-based per-pulse random stream: all draws of pulse `i` are a pure
/// function of `(seed, i)`.
#[derive(Debug, Clone)]
struct PulseRng {
    state: u64,
}

impl PulseRng {
    fn new(seed: u64, pulse: u64) -> Self {
        // SplitMix64 finalizer, decorrelates nearby (seed, pulse) pairs.
        let mut s = seed ^ pulse.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        s = (s ^ (s >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        s = (s ^ (s >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        PulseRng {
            state: s ^ (s >> 31),
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    fn polarization(&mut self) -> Polarization {
        if self.next_u64() & 1 == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    /// Poisson sample by inversion; the rates here stay far below 1, so the
    /// search ends after a couple of terms (hard cap as a numerical guard).
    fn poisson(&mut self, rate: f64) -> u32 {
        if rate <= 0.0 {
            return 0;
        }
        let mut u = self.next_f64();
        let mut pmf = (-rate).exp();
        let mut k = 0u32;
        while u >= pmf && k < 64 {
            u -= pmf;
            k += 1;
            pmf *= rate / f64::from(k);
        }
        k
    }
}

/// `1 − exp(−η·m)` click draw helper.
fn click(rng: &mut PulseRng, eta: f64, mean_photons: f64) -> bool {
    if mean_photons <= 0.0 || eta <= 0.0 {
        return false;
    }
    rng.bernoulli(-(-eta * mean_photons).exp_m1())
}

/// Mean photon numbers incident on Alice's detectors for the honest return:
/// constructive interference puts everything in D0 on different-polarization
/// pulses; on same-polarization pulses only the retained arm splits R²:RT.
fn honest_alice_means(cfg: &ProtocolConfig, same: bool) -> (f64, f64) {
    let roundtrip =
        cfg.channel_transmission() * cfg.channel_transmission() * cfg.mean_photon_number();
    if same {
        (
            cfg.reflectivity() * cfg.reflectivity() * roundtrip,
            cfg.reflectivity() * cfg.transmissivity() * roundtrip,
        )
    } else {
        (roundtrip, 0.0)
    }
}

fn coherent_pulse(
    cfg: &ProtocolConfig,
    scenario: AttackScenario,
    params: &AttackParams,
    rng: &mut PulseRng,
) -> PulseRecord {
    let alice = rng.polarization();
    let bob = rng.polarization();
    let same = alice == bob;
    let mut rec = PulseRecord {
        alice_pol: alice,
        bob_pol: bob,
        eve_action: EveAction::None,
        d0_click: false,
        d1_click: false,
        d2_click: false,
        d0_blinded: false,
        d1_blinded: false,
        d2_blinded: false,
        eve_knows_bob: false,
        eve_knows_alice: false,
    };

    let mu = cfg.mean_photon_number();
    let r = cfg.reflectivity();
    let t = cfg.transmissivity();
    let sigma = cfg.channel_transmission();
    let roundtrip = sigma * sigma * mu;
    let eve_rate = cfg.eta_eve() * t * mu;

    // Mean photon numbers facing each detector this pulse.
    let mut m_d0 = 0.0;
    let mut m_d1 = 0.0;
    let mut m_d2 = 0.0;
    let mut d0_forced = false;
    let mut d2_forced = false;

    match scenario {
        AttackScenario::Baseline => {
            if same {
                m_d2 = sigma * t * mu;
            }
            (m_d0, m_d1) = honest_alice_means(cfg, same);
        }
        AttackScenario::BlindReduceLosses => {
            // Eve's channel runs at doubled transmission; her loss-matched
            // delay arm and attenuator hand Alice the exact honest return,
            // while the delay-line light (which Bob would have absorbed) is
            // blocked whenever his detector is blinded.
            let eve_pol = rng.polarization();
            rec.eve_action = EveAction::BlindReduce { eve_pol };
            rec.eve_knows_bob = true;
            rec.d2_blinded = eve_pol == bob;
            if !rec.d2_blinded && same {
                m_d2 = 2.0 * sigma * t * mu;
            }
            (m_d0, m_d1) = honest_alice_means(cfg, same);
        }
        _ => {
            if !rng.bernoulli(params.x) {
                // Blind-and-reduce leg over the improved channel σ′.
                let eve_pol = rng.polarization();
                rec.eve_action = EveAction::BlindReduce { eve_pol };
                rec.eve_knows_bob = true;
                rec.d2_blinded = eve_pol == bob;
                if !rec.d2_blinded && same {
                    m_d2 = cfg.eve_channel_transmission() * t * mu;
                }
                (m_d0, m_d1) = honest_alice_means(cfg, same);
                if rec.d2_blinded && alice == eve_pol {
                    // Eve stands in for the measurement Bob would have made
                    // on the stored pulse. Information only.
                    rec.eve_knows_alice = click(rng, cfg.eta_eve(), t * mu);
                }
            } else {
                let photons = rng.poisson(eve_rate);
                rec.eve_action = EveAction::Measure { photons };
                rec.eve_knows_bob = true;
                if photons > 0 {
                    rec.eve_knows_alice = true;
                    if same {
                        // Bright pulse in Alice's polarization controls D2.
                        rec.d2_blinded = true;
                        d2_forced = rng.bernoulli(params.y);
                        if scenario == AttackScenario::CombinedNoDisc {
                            // Counter-weight for the faked-state surplus.
                            rec.d0_blinded = true;
                            rec.d1_blinded = true;
                        } else {
                            // Polarization-resolving Alice sees the expected
                            // retained light untouched.
                            (m_d0, m_d1) = honest_alice_means(cfg, true);
                        }
                    } else if scenario == AttackScenario::CombinedD0D2 {
                        // Interference rounds are repaid by selective forced
                        // clicks in D0's expected-polarization branch.
                        rec.d0_blinded = true;
                        rec.d1_blinded = true;
                        d0_forced = rng.bernoulli(params.z0);
                    } else {
                        // Faked state with the honest amplitude restores the
                        // constructive interference at D0.
                        (m_d0, m_d1) = honest_alice_means(cfg, false);
                    }
                } else {
                    // Zero photons seen: Bob is blinded diagonally and Eve
                    // learns his choice from the surviving polarization.
                    rec.d2_blinded = true;
                    match scenario {
                        AttackScenario::CombinedNoDisc => {
                            if rng.bernoulli(params.z) {
                                // Faked state orthogonal to Bob's choice. On
                                // same-polarization pulses it cannot
                                // interfere with the retained light, so both
                                // components land on the detectors.
                                if same {
                                    m_d0 = (r * r + t * t) * roundtrip;
                                    m_d1 = 2.0 * r * t * roundtrip;
                                } else {
                                    (m_d0, m_d1) = honest_alice_means(cfg, false);
                                }
                            } else {
                                rec.d0_blinded = true;
                                rec.d1_blinded = true;
                            }
                        }
                        AttackScenario::CombinedFullDisc => {
                            // Blinding sits in the polarization orthogonal to
                            // Bob's choice; on same-polarization pulses the
                            // retained light is in the live branch.
                            if same {
                                (m_d0, m_d1) = honest_alice_means(cfg, true);
                            } else {
                                rec.d0_blinded = true;
                                rec.d1_blinded = true;
                            }
                        }
                        AttackScenario::CombinedD1D2 => {
                            // D0 cannot tell polarizations apart, so the
                            // orthogonal blinding floods it entirely.
                            rec.d0_blinded = true;
                            if same {
                                m_d1 = r * t * roundtrip;
                            } else {
                                rec.d1_blinded = true;
                            }
                        }
                        AttackScenario::CombinedD0D2 => {
                            // Mirror image: D1 is flooded, D0 keeps its
                            // expected-polarization branch alive.
                            rec.d1_blinded = true;
                            if same {
                                m_d0 = r * r * roundtrip;
                            } else {
                                rec.d0_blinded = true;
                            }
                        }
                        _ => unreachable!("handled above"),
                    }
                }
            }
        }
    }

    rec.d2_click = d2_forced || (!rec.d2_blinded && click(rng, cfg.eta_d2(), m_d2));
    rec.d0_click = d0_forced || (!rec.d0_blinded && click(rng, cfg.eta_d0(), m_d0));
    // D1 and D2 clicks are mutually exclusive rounds; the D2 outcome wins.
    rec.d1_click = !rec.d2_click && !rec.d1_blinded && click(rng, cfg.eta_d1(), m_d1);
    rec
}

fn single_photon_pulse(
    cfg: &ProtocolConfig,
    scenario: AttackScenario,
    rng: &mut PulseRng,
) -> PulseRecord {
    let alice = rng.polarization();
    let bob = rng.polarization();
    let same = alice == bob;
    let mut rec = PulseRecord {
        alice_pol: alice,
        bob_pol: bob,
        eve_action: EveAction::None,
        d0_click: false,
        d1_click: false,
        d2_click: false,
        d0_blinded: false,
        d1_blinded: false,
        d2_blinded: false,
        eve_knows_bob: false,
        eve_knows_alice: false,
    };

    let r = cfg.reflectivity();
    let t = cfg.transmissivity();
    let sigma = cfg.channel_transmission();
    let internal_roundtrip = sigma * sigma;

    // One-way transmission of the channel leg towards Bob, and whether his
    // detector is live for this pulse.
    let (bob_leg, d2_live) = match scenario {
        AttackScenario::Baseline => (sigma, true),
        AttackScenario::BlindReduceLosses => {
            let eve_pol = rng.polarization();
            rec.eve_action = EveAction::BlindReduce { eve_pol };
            rec.eve_knows_bob = true;
            rec.d2_blinded = eve_pol == bob;
            // alice == eve means the photon is parked in Eve's delay line;
            // on same-polarization pulses that also means eve == bob, i.e.
            // exactly the light Bob would have absorbed, which Eve blocks.
            (2.0 * sigma, !rec.d2_blinded && alice != eve_pol)
        }
        _ => unreachable!("combined scenarios are coherent-only"),
    };

    if same {
        if rng.bernoulli(t) {
            // Channel arm: Bob measures it; the photon never returns.
            if d2_live && rng.bernoulli(bob_leg.min(1.0)) {
                rec.d2_click = rng.bernoulli(cfg.eta_d2());
            }
        } else if rng.bernoulli(internal_roundtrip) {
            // Retained photon survives the loss-matched internal path and
            // splits R : T at the final crossing.
            if rng.bernoulli(r) {
                rec.d0_click = rng.bernoulli(cfg.eta_d0());
            } else {
                rec.d1_click = rng.bernoulli(cfg.eta_d1());
            }
        }
    } else if rng.bernoulli(internal_roundtrip) {
        // Different choices: both paths are loss-matched, interference sends
        // the photon to D0 with certainty and D1 stays exactly dark.
        rec.d0_click = rng.bernoulli(cfg.eta_d0());
    }
    rec
}

#[derive(Default)]
struct Tally {
    counts: ClickCounts,
    sifted: u64,
    qber_errors: u64,
    eve_correct: u64,
}

impl Tally {
    fn absorb(&mut self, rec: &PulseRecord) {
        let same = rec.alice_pol == rec.bob_pol;
        if rec.d0_click {
            if same {
                self.counts.d0_same += 1;
            } else {
                self.counts.d0_opp += 1;
            }
        }
        if rec.d2_click {
            self.counts.d2 += 1;
        }
        if rec.d1_click {
            self.counts.d1 += 1;
            self.sifted += 1;
            // Alice's bit is her polarization; a D1 round means Bob shares
            // it, so he reads the bit off his own choice.
            if rec.bob_pol != rec.alice_pol {
                self.qber_errors += 1;
            }
            let eve_bit = if rec.eve_knows_alice {
                Some(rec.alice_pol)
            } else if rec.eve_knows_bob {
                Some(rec.bob_pol)
            } else {
                None
            };
            if eve_bit == Some(rec.alice_pol) {
                self.eve_correct += 1;
            }
        }
    }

    fn into_summary(self, pulses: u64) -> SimulationSummary {
        let n = pulses as f64;
        SimulationSummary {
            pulses,
            counts: self.counts,
            empirical: DetectionStats {
                p_d0: self.counts.d0_same as f64 / n,
                p_d1: self.counts.d1 as f64 / n,
                p_d2: self.counts.d2 as f64 / n,
                p_d0_opp: self.counts.d0_opp as f64 / n,
            },
            sifted_key_length: self.sifted,
            qber: if self.sifted == 0 {
                0.0
            } else {
                self.qber_errors as f64 / self.sifted as f64
            },
            eve_key_recovery: if self.sifted == 0 {
                1.0
            } else {
                self.eve_correct as f64 / self.sifted as f64
            },
        }
    }
}

fn check_run(
    cfg: &ProtocolConfig,
    scenario: AttackScenario,
    params: &AttackParams,
    source: SourceModel,
    pulses: u64,
) -> Result<(), SimulationError> {
    if pulses == 0 {
        return Err(SimulationError::NoPulses);
    }
    params.validate()?;
    scenario.check_discrimination(cfg)?;
    if source == SourceModel::SinglePhoton && scenario.is_combined() {
        return Err(SimulationError::SinglePhotonCombined);
    }
    if scenario == AttackScenario::BlindReduceLosses && cfg.channel_transmission() > 0.5 {
        return Err(SimulationError::ChannelTooGood(cfg.channel_transmission()));
    }
    Ok(())
}

/// Runs `pulses` rounds and streams every [`PulseRecord`] into `sink` while
/// tallying the summary. Deterministic in `(cfg, scenario, params, source,
/// pulses, seed)`.
pub fn simulate_with<F>(
    cfg: &ProtocolConfig,
    scenario: AttackScenario,
    params: &AttackParams,
    source: SourceModel,
    pulses: u64,
    seed: u64,
    mut sink: F,
) -> Result<SimulationSummary, SimulationError>
where
    F: FnMut(&PulseRecord),
{
    check_run(cfg, scenario, params, source, pulses)?;
    let mut tally = Tally::default();
    for pulse in 0..pulses {
        let mut rng = PulseRng::new(seed, pulse);
        let rec = match source {
            SourceModel::Coherent => coherent_pulse(cfg, scenario, params, &mut rng),
            SourceModel::SinglePhoton => single_photon_pulse(cfg, scenario, &mut rng),
        };
        tally.absorb(&rec);
        sink(&rec);
    }
    Ok(tally.into_summary(pulses))
}

/// [`simulate_with`] without a record sink.
pub fn simulate(
    cfg: &ProtocolConfig,
    scenario: AttackScenario,
    params: &AttackParams,
    source: SourceModel,
    pulses: u64,
    seed: u64,
) -> Result<SimulationSummary, SimulationError> {
    simulate_with(cfg, scenario, params, source, pulses, seed, |_| {})
}

/// Outcome of checking one empirical statistic against its expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatCheck {
    /// Binomial z-score `(p̂ − p) / sqrt(p(1−p)/n)`.
    Z(f64),
    /// Expectation was exactly 0 or 1 and the counts agree exactly.
    ExactMatch,
    /// Expectation was exactly 0 or 1 but the counts disagree.
    ExactMismatch,
}

impl StatCheck {
    /// True when the statistic is within `limit` standard errors (exact
    /// matches pass, exact mismatches fail).
    pub fn within(&self, limit: f64) -> bool {
        match self {
            StatCheck::Z(z) => z.abs() <= limit,
            StatCheck::ExactMatch => true,
            StatCheck::ExactMismatch => false,
        }
    }
}

/// Per-statistic comparison of a run against closed-form expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatChecks {
    pub p_d0: StatCheck,
    pub p_d1: StatCheck,
    pub p_d2: StatCheck,
    pub p_d0_opp: StatCheck,
}

impl StatChecks {
    pub fn all_within(&self, limit: f64) -> bool {
        self.p_d0.within(limit)
            && self.p_d1.within(limit)
            && self.p_d2.within(limit)
            && self.p_d0_opp.within(limit)
    }

    pub fn as_array(&self) -> [StatCheck; 4] {
        [self.p_d0, self.p_d1, self.p_d2, self.p_d0_opp]
    }
}

fn check_stat(count: u64, pulses: u64, expected: f64) -> StatCheck {
    if expected <= 0.0 {
        return if count == 0 {
            StatCheck::ExactMatch
        } else {
            StatCheck::ExactMismatch
        };
    }
    if expected >= 1.0 {
        return if count == pulses {
            StatCheck::ExactMatch
        } else {
            StatCheck::ExactMismatch
        };
    }
    let n = pulses as f64;
    let observed = count as f64 / n;
    StatCheck::Z((observed - expected) / (expected * (1.0 - expected) / n).sqrt())
}

/// Expected per-pulse statistics for the ideal single-photon source: linear
/// loss, exact interaction-free interference. These are what honest and
/// blind-reduce-losses single-photon runs converge to.
pub fn single_photon_expectation(cfg: &ProtocolConfig) -> DetectionStats {
    let r = cfg.reflectivity();
    let t = cfg.transmissivity();
    let s = cfg.channel_transmission();
    DetectionStats {
        p_d0: 0.5 * r * r * s * s * cfg.eta_d0(),
        p_d1: 0.5 * r * t * s * s * cfg.eta_d1(),
        p_d2: 0.5 * t * s * cfg.eta_d2(),
        p_d0_opp: 0.5 * s * s * cfg.eta_d0(),
    }
}

/// Binomial z-scores of the empirical statistics against `expected`, using
/// the whole-run pulse count as the trial count for every statistic (the
/// same convention the closed forms use).
pub fn compare_to_analytic(summary: &SimulationSummary, expected: &DetectionStats) -> StatChecks {
    StatChecks {
        p_d0: check_stat(summary.counts.d0_same, summary.pulses, expected.p_d0),
        p_d1: check_stat(summary.counts.d1, summary.pulses, expected.p_d1),
        p_d2: check_stat(summary.counts.d2, summary.pulses, expected.p_d2),
        p_d0_opp: check_stat(summary.counts.d0_opp, summary.pulses, expected.p_d0_opp),
    }
}
