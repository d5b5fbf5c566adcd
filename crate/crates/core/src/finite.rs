//! Finite-key bounds.
//!
//! Detection and error counts are turned into Hoeffding confidence
//! intervals, which feed bounds on the number of vacuum and single-photon
//! events (`s0`, `s1`) and single-photon errors (`v1`). The X-basis bounds
//! give the Z-basis phase error, and everything combines into the
//! extractable key length.
//!
//! Event bounds stay real-valued until the final key length is floored.

use serde::Serialize;

use crate::entropy::h2;
use crate::error::{Error, Result};
use crate::photon::DecoyPair;
use crate::protocol::{Basis, Intensity, PerBasis, PerIntensity, ProtocolConfig, Scheme};

/// A detection or error count: an observed integer or a real-valued
/// expectation.
pub trait Count: Copy + Default + PartialOrd + std::fmt::Display + std::iter::Sum + Serialize {
    fn as_f64(self) -> f64;
}

impl Count for u64 {
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Count for f64 {
    fn as_f64(self) -> f64 {
        self
    }
}

/// Detection counts `n(b,k)` and error counts `m(b,k)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CountObservations<T: Count = u64> {
    detections: PerBasis<PerIntensity<T>>,
    errors: PerBasis<PerIntensity<T>>,
}

/// Expected, unrounded counts of the channel model.
pub type ExpectedCounts = CountObservations<f64>;

impl<T: Count> CountObservations<T> {
    pub fn new(detections: PerBasis<PerIntensity<T>>, errors: PerBasis<PerIntensity<T>>) -> Result<Self> {
        for b in Basis::ALL {
            for k in Intensity::ALL {
                let (n, m) = (detections[b][k], errors[b][k]);
                if !(n.as_f64().is_finite() && m.as_f64() >= 0.0) {
                    return Err(Error::param("detections", format!("invalid counts ({n}, {m}) at ({b:?}, {k})")));
                }
                if m > n {
                    return Err(Error::param(
                        "errors",
                        format!("{m} errors exceed {n} detections at ({b:?}, {k})"),
                    ));
                }
            }
        }
        Ok(CountObservations { detections, errors })
    }

    pub fn detections(&self, b: Basis, k: Intensity) -> T {
        self.detections[b][k]
    }

    pub fn errors(&self, b: Basis, k: Intensity) -> T {
        self.errors[b][k]
    }

    /// `n_b`, all detections in basis `b`.
    pub fn total_detections(&self, b: Basis) -> T {
        Intensity::ALL.iter().map(|&k| self.detections[b][k]).sum()
    }

    /// `m_b`, all errors in basis `b`.
    pub fn total_errors(&self, b: Basis) -> T {
        Intensity::ALL.iter().map(|&k| self.errors[b][k]).sum()
    }
}

/// Secrecy and correctness targets with the derived per-estimate failure
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecurityParams {
    pub scheme: Scheme,
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub eps_pe: f64,
    pub eps_hash: f64,
    /// Error-correction inefficiency.
    pub f: f64,
}

impl SecurityParams {
    pub fn new(scheme: Scheme, eps_sec: f64, eps_cor: f64, f: f64) -> Result<Self> {
        for (name, v) in [("eps_sec", eps_sec), ("eps_cor", eps_cor)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("{v} not in (0, 1)")));
            }
        }
        if !(f >= 1.0 && f.is_finite()) {
            return Err(Error::param("f", format!("inefficiency {f} below 1")));
        }
        Ok(SecurityParams {
            scheme,
            eps_sec,
            eps_cor,
            eps_pe: eps_sec / f64::from(scheme.pe_events()),
            eps_hash: eps_cor,
            f,
        })
    }

    /// Parameters with zero statistical slack (`ln(1/eps_pe) = 0`).
    ///
    /// Only meaningful for exact expected-value counts, where it links the
    /// finite bounds back to the infinite-key ones.
    pub fn noiseless(scheme: Scheme, f: f64) -> Self {
        SecurityParams {
            scheme,
            eps_sec: f64::from(scheme.pe_events()),
            eps_cor: 1.0,
            eps_pe: 1.0,
            eps_hash: 1.0,
            f,
        }
    }
}

/// Hoeffding half-width `sqrt((total / 2) ln(1 / eps_pe))`.
pub fn deviation(total: u64, eps_pe: f64) -> f64 {
    real_deviation(total as f64, eps_pe)
}

fn real_deviation(total: f64, eps_pe: f64) -> f64 {
    (total / 2.0 * (1.0 / eps_pe).ln()).sqrt()
}

/// Confidence interval on the expectation of `count`, a part of
/// `total_basis_count` events. The lower end is clamped at zero.
pub fn hoeffding_interval(count: u64, total_basis_count: u64, eps_pe: f64) -> (f64, f64) {
    let delta = deviation(total_basis_count, eps_pe);
    let c = count as f64;
    ((c - delta).max(0.0), c + delta)
}

/// Per-setting intervals of one basis, clamped to `[0, total]`.
struct Intervals {
    n_lo: PerIntensity<f64>,
    n_hi: PerIntensity<f64>,
    m_lo: PerIntensity<f64>,
    m_hi: PerIntensity<f64>,
    delta_n: f64,
}

impl Intervals {
    fn new<T: Count>(obs: &CountObservations<T>, basis: Basis, eps_pe: f64) -> Self {
        let (n_b, m_b) = (obs.total_detections(basis).as_f64(), obs.total_errors(basis).as_f64());
        let interval = |count: T, total: f64| {
            let delta = real_deviation(total, eps_pe);
            let c = count.as_f64();
            ((c - delta).clamp(0.0, total), (c + delta).clamp(0.0, total))
        };
        let n = PerIntensity::from_fn(|k| interval(obs.detections(basis, k), n_b));
        let m = PerIntensity::from_fn(|k| interval(obs.errors(basis, k), m_b));
        Intervals {
            n_lo: n.map(|p| p.0),
            n_hi: n.map(|p| p.1),
            m_lo: m.map(|p| p.0),
            m_hi: m.map(|p| p.1),
            delta_n: real_deviation(n_b, eps_pe),
        }
    }
}

/// Event-count bounds of one basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FiniteBasisBounds {
    pub s0_low: f64,
    pub s0_high: f64,
    pub s1_low: f64,
    pub v1_high: f64,
}

fn check_scheme(config: &ProtocolConfig, sec: &SecurityParams, want: Scheme) -> Result<()> {
    if config.scheme != want || sec.scheme != want {
        return Err(Error::param(
            "scheme",
            format!("bounds for {want} called with {} / {}", config.scheme, sec.scheme),
        ));
    }
    Ok(())
}

/// Single-photon event bound shared by both schemes, given a vacuum-event
/// estimate for the term it subtracts.
fn s1_lower(
    iv: &Intervals,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    s0: f64,
    tau: (f64, f64),
) -> Result<f64> {
    use Intensity::{Decoy, Signal};
    let alpha = pair.alpha();
    let denom = pair.prob(Decoy, 1) - alpha * pair.prob(Signal, 1);
    if denom <= 0.0 {
        return Err(Error::ConditionViolated("P(1|decoy) - alpha P(1|signal) <= 0"));
    }
    let vac_coeff = pair.prob(Decoy, 0) - alpha * pair.prob(Signal, 0);
    let vac_term = if tau.0 > 0.0 { vac_coeff / tau.0 * s0 } else { 0.0 };
    Ok(tau.1 / denom
        * (iv.n_lo[Decoy] / config.p_decoy - alpha * iv.n_hi[Signal] / config.p_signal - vac_term))
}

/// Vacuum+weak bounds for one basis.
///
/// The vacuum term of `s1_low` is taken at `s0_high` when its coefficient
/// `P(0|decoy) - alpha P(0|signal)` is positive and at `s0_low` otherwise.
pub fn finite_bounds_vw<T: Count>(
    obs: &CountObservations<T>,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    sec: &SecurityParams,
    basis: Basis,
) -> Result<FiniteBasisBounds> {
    use Intensity::{Decoy, Signal, Vacuum};
    check_scheme(config, sec, Scheme::VacuumWeak)?;
    let iv = Intervals::new(obs, basis, sec.eps_pe);
    let tau = (config.tau(pair, 0), config.tau(pair, 1));
    let p_vac = config.p_vacuum();
    let n_b = obs.total_detections(basis).as_f64();

    let s0_low = tau.0 / p_vac * iv.n_lo[Vacuum];
    let s0_high = tau.0 / p_vac * iv.n_hi[Vacuum];
    let vac_coeff = pair.prob(Decoy, 0) - pair.alpha() * pair.prob(Signal, 0);
    let s0_used = if vac_coeff > 0.0 { s0_high } else { s0_low };
    let s1_low = s1_lower(&iv, config, pair, s0_used, tau)?;

    let v1_high = [Signal, Decoy]
        .into_iter()
        .filter(|&k| pair.prob(k, 1) > 0.0)
        .map(|k| {
            tau.1 / pair.prob(k, 1)
                * (iv.m_hi[k] / config.intensity_prob(k) - pair.prob(k, 0) * iv.m_lo[Vacuum] / p_vac)
        })
        .fold(f64::INFINITY, f64::min);

    Ok(FiniteBasisBounds {
        s0_low: s0_low.max(0.0),
        s0_high: s0_high.max(0.0),
        s1_low: s1_low.clamp(0.0, n_b),
        v1_high: v1_high.max(0.0),
    })
}

/// One-decoy bounds for one basis.
pub fn finite_bounds_onedecoy<T: Count>(
    obs: &CountObservations<T>,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    sec: &SecurityParams,
    basis: Basis,
) -> Result<FiniteBasisBounds> {
    use Intensity::{Decoy, Signal};
    check_scheme(config, sec, Scheme::OneDecoy)?;
    let iv = Intervals::new(obs, basis, sec.eps_pe);
    let tau = (config.tau(pair, 0), config.tau(pair, 1));
    let n_b = obs.total_detections(basis).as_f64();
    let (p_mu, p_nu) = (config.p_signal, config.p_decoy);

    let det = pair.prob(Signal, 1) * pair.prob(Decoy, 0) - pair.prob(Decoy, 1) * pair.prob(Signal, 0);
    if det <= 0.0 {
        return Err(Error::ConditionViolated("P(0|decoy)/P(0|signal) <= P(1|decoy)/P(1|signal)"));
    }

    let s0_low = tau.0 / det
        * (pair.prob(Signal, 1) / p_nu * iv.n_lo[Decoy] - pair.prob(Decoy, 1) / p_mu * iv.n_hi[Signal]);
    let s0_high = [Signal, Decoy]
        .into_iter()
        .map(|k| 2.0 * iv.m_hi[k] * tau.0 / (config.intensity_prob(k) * pair.prob(k, 0)))
        .fold(f64::INFINITY, f64::min)
        + 2.0 * iv.delta_n;
    let s0_high = s0_high.max(0.0);
    let s0_low = s0_low.clamp(0.0, s0_high);
    let s1_low = s1_lower(&iv, config, pair, s0_high, tau)?;
    let v1_high = tau.1 / det
        * (pair.prob(Decoy, 0) / p_mu * iv.m_hi[Signal] - pair.prob(Signal, 0) / p_nu * iv.m_lo[Decoy]);

    Ok(FiniteBasisBounds {
        s0_low,
        s0_high,
        s1_low: s1_low.clamp(0.0, n_b),
        v1_high: v1_high.max(0.0),
    })
}

/// Scheme-dispatching wrapper over the two bound sets.
pub fn finite_bounds<T: Count>(
    obs: &CountObservations<T>,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    sec: &SecurityParams,
    basis: Basis,
) -> Result<FiniteBasisBounds> {
    match config.scheme {
        Scheme::VacuumWeak => finite_bounds_vw(obs, config, pair, sec, basis),
        Scheme::OneDecoy => finite_bounds_onedecoy(obs, config, pair, sec, basis),
    }
}

/// Random-sampling correction from the test-basis error ratio `b` to the
/// key-basis phase error, for failure probability `a` and single-photon
/// event counts `c` (test) and `d` (key).
///
/// Vanishes at `b = 0` and `b = 1`, and wherever the logarithm is negative.
pub fn gamma(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if b <= 0.0 || b >= 1.0 {
        return 0.0;
    }
    let spread = (c + d) * (1.0 - b) * b;
    let log_term = ((c + d) / (c * d * (1.0 - b) * b * a * a)).log2();
    if log_term <= 0.0 {
        return 0.0;
    }
    (spread / (c * d * std::f64::consts::LN_2) * log_term).sqrt()
}

/// Upper bound on the key-basis phase error, capped at 1/2.
pub fn phase_error_upper(s1x_low: f64, v1x_high: f64, s1z_low: f64, eps_pe: f64) -> Result<f64> {
    if s1x_low <= 0.0 || s1z_low <= 0.0 {
        return Err(Error::DegenerateBound("no single-photon events certified"));
    }
    let ratio = v1x_high.min(s1x_low) / s1x_low;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidRatio(ratio));
    }
    Ok((ratio + gamma(eps_pe, ratio, s1x_low, s1z_low)).min(0.5))
}

/// Bounds of both bases plus the derived phase error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteBoundSet {
    pub z: FiniteBasisBounds,
    pub x: FiniteBasisBounds,
    pub phi_z_high: f64,
    pub tau0: f64,
    pub tau1: f64,
}

/// Real-valued key length before flooring; may be negative.
pub fn key_length_raw<T: Count>(
    bounds: &FiniteBoundSet,
    obs: &CountObservations<T>,
    sec: &SecurityParams,
    config: &ProtocolConfig,
) -> f64 {
    let leak: f64 = config
        .intensities()
        .iter()
        .map(|&k| {
            let n = obs.detections(Basis::Z, k).as_f64();
            if n == 0.0 {
                0.0
            } else {
                n * h2(obs.errors(Basis::Z, k).as_f64() / n)
            }
        })
        .sum();
    bounds.z.s0_low + bounds.z.s1_low * (1.0 - h2(bounds.phi_z_high))
        - sec.f * leak
        - 6.0 * (1.0 / sec.eps_pe).log2()
        - (2.0 / sec.eps_hash).log2()
}

/// Extractable key length in bits, floored and clamped at zero.
pub fn secret_key_length<T: Count>(
    bounds: &FiniteBoundSet,
    obs: &CountObservations<T>,
    sec: &SecurityParams,
    config: &ProtocolConfig,
) -> u64 {
    let raw = key_length_raw(bounds, obs, sec, config).floor();
    if raw > 0.0 {
        raw as u64
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteKey {
    pub bounds: FiniteBoundSet,
    pub ell_raw: f64,
    pub ell: u64,
}

/// Full finite-key pipeline for one block.
///
/// When no single-photon events can be certified in either basis the phase
/// error is reported as 1/2 and the key length is zero.
pub fn finite_key<T: Count>(
    obs: &CountObservations<T>,
    config: &ProtocolConfig,
    pair: &DecoyPair,
    sec: &SecurityParams,
) -> Result<FiniteKey> {
    let z = finite_bounds(obs, config, pair, sec, Basis::Z)?;
    let x = finite_bounds(obs, config, pair, sec, Basis::X)?;
    let tau0 = config.tau(pair, 0);
    let tau1 = config.tau(pair, 1);
    let (phi, degenerate) = match phase_error_upper(x.s1_low, x.v1_high, z.s1_low, sec.eps_pe) {
        Ok(phi) => (phi, false),
        Err(Error::DegenerateBound(_)) => (0.5, true),
        Err(e) => return Err(e),
    };
    let bounds = FiniteBoundSet {
        z,
        x,
        phi_z_high: phi,
        tau0,
        tau1,
    };
    let ell_raw = key_length_raw(&bounds, obs, sec, config);
    let ell = if degenerate {
        0
    } else {
        secret_key_length(&bounds, obs, sec, config)
    };
    Ok(FiniteKey { bounds, ell_raw, ell })
}
