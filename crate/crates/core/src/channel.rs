//! Link and detector model producing detection statistics.
//!
//! Per-photon-number yields follow a lossy channel with dark counts and a
//! fixed misalignment error. Afterpulsing and detector dead time are
//! applied at rate level: both depend only on the mean click probability
//! per pulse, so they act as a uniform extra noise floor and a uniform
//! efficiency reduction.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::asymptotic::AsymptoticObservations;
use crate::error::{Error, Result};
use crate::finite::{CountObservations, ExpectedCounts};
use crate::photon::DecoyPair;
use crate::protocol::{Basis, Intensity, PerBasis, PerIntensity, ProtocolConfig};

const HIGH_END: &str = include_str!("../presets/high_end.json");
const BUDGET: &str = include_str!("../presets/budget.json");

/// Physical description of the link and the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
    /// Pulses per second.
    pub source_rate: f64,
    /// Total channel loss in dB, detector efficiency excluded.
    pub attenuation_db: f64,
    pub detector_efficiency: f64,
    /// Dark-count probability per pulse and detector.
    pub dark_count_prob: f64,
    /// Intrinsic misalignment error probability.
    pub coding_error: f64,
    pub afterpulse_prob: f64,
    /// Seconds.
    pub dead_time: f64,
    pub num_detectors: u32,
    pub error_correction_f: f64,
}

impl ScenarioParams {
    /// High-end preset: SNSPD pair, GHz source, low coding error.
    pub fn high_end() -> Self {
        serde_json::from_str(HIGH_END).expect("bundled preset parses")
    }

    /// Budget preset: single SPAD, slower source, higher coding error.
    pub fn budget() -> Self {
        serde_json::from_str(BUDGET).expect("bundled preset parses")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "high_end" | "high-end" => Some(Self::high_end()),
            "budget" => Some(Self::budget()),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::param("scenario", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::param("scenario", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn with_attenuation(&self, attenuation_db: f64) -> Self {
        ScenarioParams {
            attenuation_db,
            ..self.clone()
        }
    }

    /// Every violated field invariant, as `(field, message)` pairs.
    pub fn diagnostics(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        for (name, v) in [
            ("detector_efficiency", self.detector_efficiency),
            ("dark_count_prob", self.dark_count_prob),
            ("coding_error", self.coding_error),
            ("afterpulse_prob", self.afterpulse_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push((name, format!("{v} is not a probability")));
            }
        }
        if self.coding_error > 0.5 {
            out.push(("coding_error", format!("{} exceeds 1/2", self.coding_error)));
        }
        for (name, v) in [
            ("source_rate", self.source_rate),
            ("attenuation_db", self.attenuation_db),
            ("dead_time", self.dead_time),
        ] {
            if !(v >= 0.0) {
                out.push((name, format!("{v} must be nonnegative")));
            }
        }
        if !(self.source_rate > 0.0 && self.source_rate.is_finite()) {
            out.push(("source_rate", "must be positive and finite".into()));
        }
        if self.num_detectors == 0 {
            out.push(("num_detectors", "at least one detector required".into()));
        }
        if !(self.error_correction_f >= 1.0 && self.error_correction_f.is_finite()) {
            out.push(("error_correction_f", format!("{} below 1", self.error_correction_f)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.diagnostics().into_iter().next() {
            None => Ok(()),
            Some((name, msg)) => Err(Error::param(name, msg)),
        }
    }
}

/// Per-photon-number yields `Y_i` and error rates `e_i` at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelYields {
    /// Overall transmittance including detector efficiency.
    pub transmittance: f64,
    /// Vacuum yield from dark counts across all detectors.
    pub dark_yield: f64,
    pub misalignment: f64,
    /// Extra click probability per pulse from afterpulses.
    pub afterpulse_yield: f64,
    /// Dead-time survival factor applied to every click.
    pub saturation: f64,
}

/// Yields of the bare link: no afterpulsing, no dead-time loss.
pub fn yields_from_physics(scenario: &ScenarioParams) -> ChannelYields {
    let transmittance = scenario.detector_efficiency * 10f64.powf(-scenario.attenuation_db / 10.0);
    let dark_yield = -(f64::from(scenario.num_detectors) * (-scenario.dark_count_prob).ln_1p()).exp_m1();
    ChannelYields {
        transmittance,
        dark_yield,
        misalignment: scenario.coding_error,
        afterpulse_yield: 0.0,
        saturation: 1.0,
    }
}

impl ChannelYields {
    /// `1 - (1 - eta)^i`: probability that at least one photon arrives.
    fn arrival(&self, i: usize) -> f64 {
        if self.transmittance >= 1.0 {
            return if i == 0 { 0.0 } else { 1.0 };
        }
        -(i as f64 * (-self.transmittance).ln_1p()).exp_m1()
    }

    /// `1 - (1 - Y0)(1 - eta)^i`
    fn bare_yield(&self, i: usize) -> f64 {
        self.dark_yield + (1.0 - self.dark_yield) * self.arrival(i)
    }

    fn noisy_yield(&self, i: usize) -> f64 {
        let y = self.bare_yield(i);
        y + (1.0 - y) * self.afterpulse_yield
    }

    /// `Y_i`.
    pub fn yield_of(&self, i: usize) -> f64 {
        self.saturation * self.noisy_yield(i)
    }

    /// `e_i`; random (error 1/2) for dark counts and afterpulses.
    pub fn error_rate(&self, i: usize) -> f64 {
        let y = self.noisy_yield(i);
        if y <= 0.0 {
            return 0.0;
        }
        let bare = self.bare_yield(i);
        let errors = 0.5 * self.dark_yield
            + self.misalignment * self.arrival(i)
            + 0.5 * (1.0 - bare) * self.afterpulse_yield;
        (errors / y).clamp(0.0, 0.5)
    }

    /// Applies afterpulsing and dead time for a mean bare click
    /// probability `click_prob` per pulse.
    pub fn at_click_probability(&self, scenario: &ScenarioParams, click_prob: f64) -> Self {
        let afterpulse_yield = scenario.afterpulse_prob * click_prob;
        let noisy = click_prob + (1.0 - click_prob) * afterpulse_yield;
        let per_detector_rate = scenario.source_rate * noisy / f64::from(scenario.num_detectors);
        ChannelYields {
            afterpulse_yield,
            saturation: 1.0 / (1.0 + per_detector_rate * scenario.dead_time),
            ..*self
        }
    }

    /// `(Q_k, E_k Q_k)`: detection and error probabilities of setting `k`.
    pub fn gain(&self, pair: &DecoyPair, k: Intensity) -> (f64, f64) {
        (0..=pair.max_photons())
            .map(|i| {
                let p = pair.prob(k, i);
                let y = self.yield_of(i);
                (p * y, p * y * self.error_rate(i))
            })
            .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1))
    }
}

/// Yields at the operating point set by the protocol's mean click rate.
pub fn operating_point(scenario: &ScenarioParams, config: &ProtocolConfig, pair: &DecoyPair) -> ChannelYields {
    let bare = yields_from_physics(scenario);
    let click_prob: f64 = config
        .intensities()
        .iter()
        .map(|&k| config.intensity_prob(k) * bare.gain(pair, k).0)
        .sum();
    bare.at_click_probability(scenario, click_prob)
}

/// Gains and error rates an infinitely long run would measure.
pub fn expected_observations(
    scenario: &ScenarioParams,
    config: &ProtocolConfig,
    pair: &DecoyPair,
) -> AsymptoticObservations {
    let yields = operating_point(scenario, config, pair);
    let mut q = PerIntensity::default();
    let mut e = PerIntensity::default();
    for &k in config.intensities() {
        let (gain, err) = yields.gain(pair, k);
        q[k] = gain;
        e[k] = if gain > 0.0 { err / gain } else { 0.0 };
    }
    AsymptoticObservations::new(PerBasis { z: q, x: q }, PerBasis { z: e, x: e })
        .expect("model gains are probabilities")
}

/// Ground-truth detections and errors from vacuum and single-photon pulses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhotonEvents {
    pub s0: u64,
    pub s1: u64,
    pub v0: u64,
    pub v1: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedBlock {
    pub pulses_sent: u64,
    pub observations: CountObservations,
    /// Seconds.
    pub acquisition_time: f64,
    /// Only known for sampled blocks.
    pub photon_events: Option<PerBasis<PhotonEvents>>,
}

impl SimulatedBlock {
    fn empty() -> Self {
        SimulatedBlock {
            pulses_sent: 0,
            observations: CountObservations::default(),
            acquisition_time: 0.0,
            photon_events: None,
        }
    }
}

/// Per-setting `(Q_k, E_k Q_k)` at the operating point and the Z-basis
/// detection probability per pulse sent.
fn expected_rates(
    scenario: &ScenarioParams,
    config: &ProtocolConfig,
    pair: &DecoyPair,
) -> (PerIntensity<(f64, f64)>, f64) {
    let yields = operating_point(scenario, config, pair);
    let gains = PerIntensity::from_fn(|k| yields.gain(pair, k));
    let z_rate = config
        .intensities()
        .iter()
        .map(|&k| config.choice_prob(Basis::Z, k) * gains[k].0)
        .sum();
    (gains, z_rate)
}

/// Expected-value block with just enough pulses for `n_z_target` Z-basis
/// detections; counts are the rounded expectations.
pub fn expected_block(
    scenario: &ScenarioParams,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    n_z_target: u64,
) -> Result<SimulatedBlock> {
    if n_z_target == 0 {
        return Ok(SimulatedBlock::empty());
    }
    let (gains, z_rate) = expected_rates(scenario, config, pair);
    if !(z_rate > 0.0) {
        return Err(Error::UnreachableTarget);
    }

    let counts = |pulses: f64| {
        let mut n = PerBasis::<PerIntensity<u64>>::default();
        let mut m = n;
        for b in Basis::ALL {
            for &k in config.intensities() {
                let share = pulses * config.choice_prob(b, k);
                n[b][k] = (share * gains[k].0).round() as u64;
                m[b][k] = ((share * gains[k].1).round() as u64).min(n[b][k]);
            }
        }
        (n, m)
    };
    let mut pulses = (n_z_target as f64 / z_rate).ceil();
    let (mut n, mut m) = counts(pulses);
    loop {
        let deficit = n_z_target.saturating_sub(Intensity::ALL.iter().map(|&k| n.z[k]).sum::<u64>());
        if deficit == 0 {
            break;
        }
        pulses += (deficit as f64 / z_rate).ceil();
        (n, m) = counts(pulses);
    }
    Ok(SimulatedBlock {
        pulses_sent: pulses as u64,
        observations: CountObservations::new(n, m)?,
        acquisition_time: pulses / scenario.source_rate,
        photon_events: None,
    })
}

/// Expected-value block without rounding.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExpectedBlock {
    /// Real-valued, so the Z-basis total equals the target exactly.
    pub pulses: f64,
    pub observations: ExpectedCounts,
    /// Seconds.
    pub acquisition_time: f64,
}

/// Same model as [`expected_block`], keeping the counts as exact
/// expectations. Smooth in every protocol parameter.
pub fn expected_counts(
    scenario: &ScenarioParams,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    n_z_target: f64,
) -> Result<ExpectedBlock> {
    if !(n_z_target >= 0.0 && n_z_target.is_finite()) {
        return Err(Error::param("n_z_target", format!("{n_z_target} is not a nonnegative count")));
    }
    if n_z_target == 0.0 {
        return Ok(ExpectedBlock::default());
    }
    let (gains, z_rate) = expected_rates(scenario, config, pair);
    if !(z_rate > 0.0) {
        return Err(Error::UnreachableTarget);
    }
    let pulses = n_z_target / z_rate;
    let mut n = PerBasis::<PerIntensity<f64>>::default();
    let mut m = n;
    for b in Basis::ALL {
        for &k in config.intensities() {
            let share = pulses * config.choice_prob(b, k);
            n[b][k] = share * gains[k].0;
            m[b][k] = (share * gains[k].1).min(n[b][k]);
        }
    }
    Ok(ExpectedBlock {
        pulses,
        observations: ExpectedCounts::new(n, m)?,
        acquisition_time: pulses / scenario.source_rate,
    })
}

fn draw(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Block drawn pulse class by pulse class from the same model as
/// [`expected_block`]; identical seeds give identical blocks.
pub fn sampled_block(
    scenario: &ScenarioParams,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    n_pulses: u64,
    rng_seed: u64,
) -> Result<SimulatedBlock> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let yields = operating_point(scenario, config, pair);
    let top = pair.max_photons();

    let mut n = PerBasis::<PerIntensity<u64>>::default();
    let mut m = n;
    let mut truth = PerBasis::<PhotonEvents>::default();

    let mut remaining = n_pulses;
    let mut remaining_prob = 1.0;
    for b in Basis::ALL {
        for &k in config.intensities() {
            let p = config.choice_prob(b, k);
            let mut class = draw(&mut rng, remaining, p / remaining_prob);
            remaining -= class;
            remaining_prob -= p;

            let mut left = 1.0;
            for i in 0..=top {
                let pi = pair.prob(k, i);
                let pulses = if i == top { class } else { draw(&mut rng, class, pi / left) };
                class -= pulses;
                left -= pi;
                let det = draw(&mut rng, pulses, yields.yield_of(i));
                let err = draw(&mut rng, det, yields.error_rate(i));
                n[b][k] += det;
                m[b][k] += err;
                match i {
                    0 => {
                        truth[b].s0 += det;
                        truth[b].v0 += err;
                    }
                    1 => {
                        truth[b].s1 += det;
                        truth[b].v1 += err;
                    }
                    _ => {}
                }
                if class == 0 {
                    break;
                }
            }
        }
    }
    Ok(SimulatedBlock {
        pulses_sent: n_pulses,
        observations: CountObservations::new(n, m)?,
        acquisition_time: n_pulses as f64 / scenario.source_rate,
        photon_events: Some(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon::PhotonDistribution;
    use crate::protocol::Scheme;

    fn scenario(eta: f64, dark: f64, ed: f64) -> ScenarioParams {
        ScenarioParams {
            label: None,
            version: None,
            source_rate: 1e9,
            attenuation_db: 0.0,
            detector_efficiency: eta,
            dark_count_prob: dark,
            coding_error: ed,
            afterpulse_prob: 0.0,
            dead_time: 0.0,
            num_detectors: 1,
            error_correction_f: 1.1,
        }
    }

    #[test]
    fn presets_are_valid() {
        assert!(ScenarioParams::high_end().validate().is_ok());
        assert!(ScenarioParams::budget().validate().is_ok());
        assert!(ScenarioParams::preset("nope").is_none());
    }

    #[test]
    fn substitution_example() {
        let y = yields_from_physics(&scenario(0.1, 1e-5, 0.01));
        let y1 = 1.0 - (1.0 - 1e-5) * 0.9;
        assert!((y.yield_of(1) - y1).abs() < 1e-16);
        assert!((y.error_rate(1) - (5e-6 + 0.001) / y1).abs() < 1e-15);
    }

    #[test]
    fn infinite_loss_leaves_dark_counts() {
        let mut s = scenario(0.85, 1e-6, 0.01);
        s.attenuation_db = f64::INFINITY;
        let y = yields_from_physics(&s);
        for i in [0, 1, 5] {
            assert!((y.yield_of(i) - 1e-6).abs() < 1e-21);
            assert!((y.error_rate(i) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_channel_has_no_errors() {
        let y = yields_from_physics(&scenario(0.3, 0.0, 0.0));
        assert!((1..10).all(|i| y.error_rate(i) == 0.0));
    }

    #[test]
    fn yields_and_errors_are_ordered_across_presets() {
        for base in [ScenarioParams::high_end(), ScenarioParams::budget()] {
            for db in [0.0, 10.0, 25.0, 40.0] {
                let y = yields_from_physics(&base.with_attenuation(db)).at_click_probability(&base, 1e-3);
                for i in 0..30 {
                    assert!(y.yield_of(i + 1) >= y.yield_of(i));
                    let e = y.error_rate(i);
                    assert!((0.0..=0.5).contains(&e));
                    if i >= 1 {
                        assert!(y.error_rate(i + 1) <= e + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn ideal_single_photon_source() {
        let pair = DecoyPair::new(
            PhotonDistribution::tabulated(vec![0.0, 1.0]).unwrap(),
            PhotonDistribution::tabulated(vec![0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let config = ProtocolConfig::new(Scheme::OneDecoy, 0.5, 0.5, 0.5).unwrap();
        let block = expected_block(&scenario(1.0, 0.0, 0.0), &config, &pair, 1000).unwrap();
        let pulses = block.pulses_sent as f64;
        let obs = &block.observations;
        assert_eq!(obs.detections(Basis::Z, Intensity::Signal) as f64, (pulses * 0.125).round());
        assert_eq!(obs.total_errors(Basis::Z) + obs.total_errors(Basis::X), 0);
        assert!(obs.total_detections(Basis::Z) >= 1000);
    }

    #[test]
    fn empty_target_and_dead_channel() {
        let pair = DecoyPair::new(
            PhotonDistribution::poisson(0.5).unwrap(),
            PhotonDistribution::poisson(0.1).unwrap(),
        )
        .unwrap();
        let config = ProtocolConfig::new(Scheme::VacuumWeak, 0.9, 0.7, 0.2).unwrap();
        let block = expected_block(&ScenarioParams::high_end(), &config, &pair, 0).unwrap();
        assert_eq!(block.pulses_sent, 0);
        assert_eq!(
            expected_block(&scenario(0.0, 0.0, 0.0), &config, &pair, 10),
            Err(Error::UnreachableTarget)
        );
        let zero = sampled_block(&scenario(0.0, 0.0, 0.0), &config, &pair, 1_000_000, 1).unwrap();
        assert_eq!(zero.observations, CountObservations::default());
    }

    #[test]
    fn sampling_is_deterministic() {
        let pair = DecoyPair::new(
            PhotonDistribution::thermal(0.5).unwrap(),
            PhotonDistribution::thermal(0.1).unwrap(),
        )
        .unwrap();
        let config = ProtocolConfig::new(Scheme::VacuumWeak, 0.7, 0.6, 0.3).unwrap();
        let s = ScenarioParams::budget();
        let a = sampled_block(&s, &config, &pair, 10_000_000, 42).unwrap();
        let b = sampled_block(&s, &config, &pair, 10_000_000, 42).unwrap();
        assert_eq!(a, b);
        let c = sampled_block(&s, &config, &pair, 10_000_000, 43).unwrap();
        assert_ne!(a.observations, c.observations);
    }
}
