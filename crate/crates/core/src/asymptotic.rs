//! Infinite-key bounds on the vacuum and single-photon yields and on the
//! single-photon error rate, plus the resulting secret fraction.

use serde::Serialize;

use crate::entropy::h2;
use crate::error::{Error, Result};
use crate::photon::DecoyPair;
use crate::protocol::{Basis, Intensity, PerBasis, PerIntensity, ProtocolConfig, Scheme};

/// Observed gains `Q(b,k)` and conditional error rates `E(b,k)`.
///
/// Entries for settings a scheme does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticObservations {
    gains: PerBasis<PerIntensity<f64>>,
    error_rates: PerBasis<PerIntensity<f64>>,
}

impl AsymptoticObservations {
    pub fn new(
        gains: PerBasis<PerIntensity<f64>>,
        error_rates: PerBasis<PerIntensity<f64>>,
    ) -> Result<Self> {
        for b in Basis::ALL {
            for k in Intensity::ALL {
                for (name, v) in [("gain", gains[b][k]), ("error_rate", error_rates[b][k])] {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::param(name, format!("{v} at ({b:?}, {k}) not in [0, 1]")));
                    }
                }
            }
        }
        Ok(AsymptoticObservations { gains, error_rates })
    }

    pub fn gain(&self, b: Basis, k: Intensity) -> f64 {
        self.gains[b][k]
    }

    pub fn error_rate(&self, b: Basis, k: Intensity) -> f64 {
        self.error_rates[b][k]
    }

    /// `E(b,k) * Q(b,k)`: probability of an erroneous detection.
    pub fn error_gain(&self, b: Basis, k: Intensity) -> f64 {
        self.error_rates[b][k] * self.gains[b][k]
    }
}

/// A bound after clamping into its physical range, with the formula's raw
/// value kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped {
    pub value: f64,
    pub raw: f64,
}

impl Clamped {
    fn new(raw: f64, lo: f64, hi: f64) -> Self {
        Clamped {
            value: raw.clamp(lo, hi),
            raw,
        }
    }
}

/// Lower bound on the single-photon yield given a vacuum-yield estimate.
pub fn y1_lower(obs: &AsymptoticObservations, pair: &DecoyPair, y0: f64, basis: Basis) -> Result<Clamped> {
    use Intensity::{Decoy, Signal};
    let alpha = pair.alpha();
    let denom = pair.prob(Decoy, 1) - alpha * pair.prob(Signal, 1);
    if denom <= 0.0 {
        return Err(Error::ConditionViolated("P(1|decoy) - alpha P(1|signal) <= 0"));
    }
    let vac_coeff = pair.prob(Decoy, 0) - alpha * pair.prob(Signal, 0);
    let raw = (obs.gain(basis, Decoy) - alpha * obs.gain(basis, Signal) - vac_coeff * y0) / denom;
    Ok(Clamped::new(raw, 0.0, 1.0))
}

/// Upper bound on the single-photon error rate from the decoy setting,
/// taking vacuum detections to be errors half of the time.
pub fn e1_upper_vw(
    obs: &AsymptoticObservations,
    pair: &DecoyPair,
    y0: f64,
    y1_low: f64,
    basis: Basis,
) -> Result<Clamped> {
    use Intensity::Decoy;
    if y1_low <= 0.0 {
        return Err(Error::DegenerateBound("single-photon yield bound is zero"));
    }
    let raw = (obs.error_gain(basis, Decoy) - pair.prob(Decoy, 0) * y0 / 2.0)
        / (pair.prob(Decoy, 1) * y1_low);
    Ok(Clamped::new(raw, 0.0, 0.5))
}

/// `P(1|signal) P(0|decoy) - P(1|decoy) P(0|signal)`, positive exactly when
/// the second admissibility condition holds.
fn cross_determinant(pair: &DecoyPair) -> f64 {
    use Intensity::{Decoy, Signal};
    pair.prob(Signal, 1) * pair.prob(Decoy, 0) - pair.prob(Decoy, 1) * pair.prob(Signal, 0)
}

/// Vacuum-yield bracket for the one-decoy scheme, `(low, high)`.
///
/// `low` may exceed `high` for inconsistent data; callers clamp.
pub fn y0_bounds_onedecoy(
    obs: &AsymptoticObservations,
    pair: &DecoyPair,
    basis: Basis,
) -> Result<(Clamped, Clamped)> {
    use Intensity::{Decoy, Signal};
    let det = cross_determinant(pair);
    if det <= 0.0 {
        return Err(Error::ConditionViolated("P(0|decoy)/P(0|signal) <= P(1|decoy)/P(1|signal)"));
    }
    let low = (pair.prob(Signal, 1) * obs.gain(basis, Decoy)
        - pair.prob(Decoy, 1) * obs.gain(basis, Signal))
        / det;
    let high = 2.0 * obs.error_gain(basis, Signal) / pair.prob(Signal, 0);
    Ok((Clamped::new(low, 0.0, 1.0), Clamped::new(high, 0.0, 1.0)))
}

/// One-decoy single-photon error bound; eliminates the vacuum yield.
pub fn e1_upper_onedecoy(
    obs: &AsymptoticObservations,
    pair: &DecoyPair,
    y1_low: f64,
    basis: Basis,
) -> Result<Clamped> {
    use Intensity::{Decoy, Signal};
    let det = cross_determinant(pair);
    if det <= 0.0 {
        return Err(Error::ConditionViolated("P(0|decoy)/P(0|signal) <= P(1|decoy)/P(1|signal)"));
    }
    if y1_low <= 0.0 {
        return Err(Error::DegenerateBound("single-photon yield bound is zero"));
    }
    let raw = (pair.prob(Decoy, 0) * obs.error_gain(basis, Signal)
        - pair.prob(Signal, 0) * obs.error_gain(basis, Decoy))
        / (det * y1_low);
    Ok(Clamped::new(raw, 0.0, 0.5))
}

/// Bounds for one basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisBounds {
    pub y0_low: f64,
    pub y0_high: f64,
    pub y1_low: f64,
    pub e1_high: f64,
}

pub type AsymptoticBoundSet = PerBasis<BasisBounds>;

/// All bounds of one basis with the formulas appropriate to `scheme`.
///
/// A vanishing single-photon yield bound makes the error bound degenerate;
/// the error rate is then reported as 1/2 (no secrecy from that class).
pub fn basis_bounds(
    obs: &AsymptoticObservations,
    scheme: Scheme,
    pair: &DecoyPair,
    basis: Basis,
) -> Result<BasisBounds> {
    let insecure = |r: Result<Clamped>| match r {
        Ok(c) => Ok(c.value),
        Err(Error::DegenerateBound(_)) => Ok(0.5),
        Err(e) => Err(e),
    };
    match scheme {
        Scheme::VacuumWeak => {
            let y0 = obs.gain(basis, Intensity::Vacuum);
            let y1 = y1_lower(obs, pair, y0, basis)?.value;
            let e1 = insecure(e1_upper_vw(obs, pair, y0, y1, basis))?;
            Ok(BasisBounds {
                y0_low: y0,
                y0_high: y0,
                y1_low: y1,
                e1_high: e1,
            })
        }
        Scheme::OneDecoy => {
            let (low, high) = y0_bounds_onedecoy(obs, pair, basis)?;
            let (y0_low, y0_high) = (low.value.min(high.value), high.value);
            let y1 = y1_lower(obs, pair, y0_high, basis)?.value;
            let e1 = insecure(e1_upper_onedecoy(obs, pair, y1, basis))?;
            Ok(BasisBounds {
                y0_low,
                y0_high,
                y1_low: y1,
                e1_high: e1,
            })
        }
    }
}

pub fn bounds(obs: &AsymptoticObservations, scheme: Scheme, pair: &DecoyPair) -> Result<AsymptoticBoundSet> {
    Ok(PerBasis {
        z: basis_bounds(obs, scheme, pair, Basis::Z)?,
        x: basis_bounds(obs, scheme, pair, Basis::X)?,
    })
}

/// Secure fraction of matched Z-basis pulses. Negative values are returned
/// unchanged.
pub fn secret_fraction(
    obs: &AsymptoticObservations,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    bounds: &AsymptoticBoundSet,
    f: f64,
) -> f64 {
    let ks = config.intensities();
    let weighted = |i: usize| -> f64 {
        ks.iter()
            .map(|&k| config.intensity_prob(k) * pair.prob(k, i))
            .sum()
    };
    let leak: f64 = ks
        .iter()
        .map(|&k| config.intensity_prob(k) * obs.gain(Basis::Z, k) * h2(obs.error_rate(Basis::Z, k)))
        .sum();
    weighted(0) * bounds.z.y0_low + weighted(1) * bounds.z.y1_low * (1.0 - h2(bounds.x.e1_high))
        - f * leak
}
