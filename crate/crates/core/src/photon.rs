//! Photon-number statistics of the transmitter's intensity settings.
//!
//! A [`PhotonDistribution`] is the pmf `P(i|k)` of one setting. The three
//! analytic families keep their form under loss, so attenuation only
//! rescales the mean; tabulated distributions are thinned explicitly.
//! [`DecoyPair`] couples a signal and a decoy distribution and certifies the
//! ratio condition the decoy bounds rely on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};
use crate::protocol::Intensity;

/// Tail mass left beyond the truncation index of unbounded families.
pub const TAIL_MASS: f64 = 1e-15;

/// Tolerance on the normalisation of user-supplied tables.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    Thermal,
    Binomial,
    Tabulated,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Poisson => "poisson",
            Family::Thermal => "thermal",
            Family::Binomial => "binomial",
            Family::Tabulated => "tabulated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Poisson,
    Thermal,
    Binomial { n: u32 },
    Tabulated { pmf: Arc<[f64]> },
}

/// Photon-number distribution of one intensity setting.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    shape: Shape,
    mean: f64,
    truncation: usize,
}

fn check_mean(mean: f64) -> Result<()> {
    if mean.is_finite() && mean >= 0.0 {
        Ok(())
    } else {
        Err(Error::param("mean", format!("{mean} is not a nonnegative real")))
    }
}

impl PhotonDistribution {
    /// Coherent (attenuated laser) statistics.
    pub fn poisson(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(Self::build(Shape::Poisson, mean))
    }

    /// Single-mode thermal (Bose-Einstein) statistics.
    pub fn thermal(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(Self::build(Shape::Thermal, mean))
    }

    /// `n` independent emitters, each firing with probability `mean / n`.
    pub fn binomial(mean: f64, n: u32) -> Result<Self> {
        check_mean(mean)?;
        if n == 0 {
            return Err(Error::param("n", "binomial needs at least one emitter"));
        }
        if mean > f64::from(n) {
            return Err(Error::param(
                "mean",
                format!("binomial mean {mean} exceeds n = {n}"),
            ));
        }
        Ok(Self::build(Shape::Binomial { n }, mean))
    }

    /// Explicit pmf table over photon numbers `0..pmf.len()`.
    pub fn tabulated(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::param("pmf", "empty table"));
        }
        if let Some(bad) = pmf.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::param("pmf", format!("entry {bad} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::param("pmf", format!("entries sum to {total}, not 1")));
        }
        let mean = pmf.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
        Ok(Self::build(Shape::Tabulated { pmf: pmf.into() }, mean))
    }

    /// The vacuum setting: no photons, ever.
    pub fn vacuum() -> Self {
        Self::build(Shape::Tabulated { pmf: Arc::from([1.0]) }, 0.0)
    }

    fn build(shape: Shape, mean: f64) -> Self {
        let truncation = truncation_index(&shape, mean);
        PhotonDistribution {
            shape,
            mean,
            truncation,
        }
    }

    pub fn family(&self) -> Family {
        match self.shape {
            Shape::Poisson => Family::Poisson,
            Shape::Thermal => Family::Thermal,
            Shape::Binomial { .. } => Family::Binomial,
            Shape::Tabulated { .. } => Family::Tabulated,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Largest photon number with nonzero probability, when finite.
    pub fn max_photons(&self) -> Option<usize> {
        match &self.shape {
            _ if self.mean == 0.0 => Some(0),
            Shape::Poisson | Shape::Thermal => None,
            Shape::Binomial { n } => Some(*n as usize),
            Shape::Tabulated { pmf } => Some(
                pmf.iter()
                    .rposition(|&p| p > 0.0)
                    .unwrap_or(0),
            ),
        }
    }

    /// Emitter count of a binomial source.
    pub fn emitters(&self) -> Option<u32> {
        match self.shape {
            Shape::Binomial { n } => Some(n),
            _ => None,
        }
    }

    pub fn table(&self) -> Option<&[f64]> {
        match &self.shape {
            Shape::Tabulated { pmf } => Some(pmf),
            _ => None,
        }
    }

    /// Smallest index past which the remaining mass is below [`TAIL_MASS`]
    /// (or the exact support end for bounded distributions).
    pub fn truncation_index(&self) -> usize {
        self.truncation
    }

    /// Same shape, different mean.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        match &self.shape {
            Shape::Poisson => Self::poisson(mean),
            Shape::Thermal => Self::thermal(mean),
            Shape::Binomial { n } => Self::binomial(mean, *n),
            Shape::Tabulated { .. } => {
                check_mean(mean)?;
                if mean > self.mean {
                    return Err(Error::param(
                        "mean",
                        format!("tabulated source cannot be brightened from {} to {mean}", self.mean),
                    ));
                }
                if self.mean == 0.0 {
                    return Ok(self.clone());
                }
                self.attenuate(mean / self.mean)
            }
        }
    }

    /// Natural log of `P(i)`; `-inf` outside the support.
    pub fn ln_pmf(&self, i: usize) -> f64 {
        let mu = self.mean;
        match &self.shape {
            Shape::Tabulated { pmf } => pmf.get(i).map_or(f64::NEG_INFINITY, |p| p.ln()),
            _ if mu == 0.0 => {
                if i == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Shape::Poisson => i as f64 * mu.ln() - mu - ln_factorial(i as u64),
            Shape::Thermal => i as f64 * mu.ln() - (i as f64 + 1.0) * mu.ln_1p(),
            Shape::Binomial { n } => {
                let n = *n as usize;
                if i > n {
                    return f64::NEG_INFINITY;
                }
                let p = mu / n as f64;
                if p >= 1.0 {
                    return if i == n { 0.0 } else { f64::NEG_INFINITY };
                }
                ln_binomial(n as u64, i as u64)
                    + i as f64 * p.ln()
                    + (n - i) as f64 * (-p).ln_1p()
            }
        }
    }

    /// `P(i)`, the probability of emitting exactly `i` photons.
    pub fn pmf(&self, i: usize) -> f64 {
        match &self.shape {
            Shape::Tabulated { pmf } => pmf.get(i).copied().unwrap_or(0.0),
            _ => self.ln_pmf(i).exp(),
        }
    }

    /// Photon loss with survival probability `transmittance` per photon.
    pub fn attenuate(&self, transmittance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmittance) {
            return Err(Error::param(
                "transmittance",
                format!("{transmittance} not in [0, 1]"),
            ));
        }
        if transmittance == 1.0 {
            return Ok(self.clone());
        }
        let mean = self.mean * transmittance;
        match &self.shape {
            Shape::Poisson => Self::poisson(mean),
            Shape::Thermal => Self::thermal(mean),
            Shape::Binomial { n } => Self::binomial(mean.min(f64::from(*n)), *n),
            Shape::Tabulated { pmf } => Self::tabulated(thin(pmf, transmittance)),
        }
    }
}

/// Binomial thinning of a finite pmf table.
fn thin(pmf: &[f64], t: f64) -> Vec<f64> {
    if t == 0.0 {
        return vec![1.0];
    }
    let (ln_t, ln_s) = (t.ln(), (-t).ln_1p());
    let mut out: Vec<f64> = (0..pmf.len())
        .map(|i| {
            pmf.iter()
                .enumerate()
                .skip(i)
                .filter(|(_, &p)| p > 0.0)
                .map(|(j, &p)| {
                    let ln_w = ln_binomial(j as u64, i as u64)
                        + i as f64 * ln_t
                        + (j - i) as f64 * ln_s;
                    p * ln_w.exp()
                })
                .sum()
        })
        .collect();
    // thinning preserves mass exactly; remove the accumulated rounding
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

fn truncation_index(shape: &Shape, mean: f64) -> usize {
    let ln_tail = TAIL_MASS.ln();
    match shape {
        Shape::Tabulated { pmf } => pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0),
        _ if mean == 0.0 => 0,
        Shape::Poisson => {
            // Chernoff: P(X >= a) <= exp(-mu + a (1 + ln mu - ln a)) for a > mu
            let mut a = mean.floor() as usize + 1;
            loop {
                let af = a as f64;
                if -mean + af * (1.0 + mean.ln() - af.ln()) < ln_tail {
                    return a - 1;
                }
                a += 1;
            }
        }
        Shape::Thermal => {
            // P(X >= a) = r^a with r = mu / (1 + mu)
            let ln_r = mean.ln() - mean.ln_1p();
            (ln_tail / ln_r).floor() as usize
        }
        Shape::Binomial { n } => {
            let n = *n as usize;
            let p = mean / n as f64;
            if p >= 1.0 {
                return n;
            }
            // Chernoff: P(X >= a) <= exp(-n KL(a/n || p)) for a/n > p
            let kl = |q: f64| {
                let mut d = q * (q / p).ln();
                if q < 1.0 {
                    d += (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln();
                }
                d
            };
            ((mean.floor() as usize + 1)..=n)
                .find(|&a| -(n as f64) * kl(a as f64 / n as f64) < ln_tail)
                .map_or(n, |a| a - 1)
        }
    }
}

/// Ratio `P(i|decoy) / P(i|signal)`; `None` when both vanish.
fn pmf_ratio(signal: &PhotonDistribution, decoy: &PhotonDistribution, i: usize) -> Result<Option<f64>> {
    let (ps, pd) = (signal.pmf(i), decoy.pmf(i));
    if ps > f64::MIN_POSITIVE && pd > f64::MIN_POSITIVE {
        return Ok(Some(pd / ps));
    }
    let (ls, ld) = (signal.ln_pmf(i), decoy.ln_pmf(i));
    match (ls == f64::NEG_INFINITY, ld == f64::NEG_INFINITY) {
        (true, true) => Ok(None),
        (true, false) => Err(Error::DivergentRatio { photons: i }),
        _ => Ok(Some((ld - ls).exp())),
    }
}

/// α = max over `2 <= i <= i_max` of `P(i|decoy) / P(i|signal)`.
///
/// Terms where both probabilities vanish are skipped. When either
/// distribution has mass past `i_max`, the ratio at `i_max` must not exceed
/// the running maximum, otherwise the truncated scan cannot certify α.
pub fn compute_alpha(
    signal: &PhotonDistribution,
    decoy: &PhotonDistribution,
    i_max: usize,
) -> Result<f64> {
    if i_max < 2 {
        return Err(Error::param("i_max", "must be at least 2"));
    }
    let truncated = [signal, decoy]
        .iter()
        .any(|d| d.max_photons().is_none_or(|m| m > i_max));
    let mut best: Option<f64> = None;
    for i in 2..=i_max {
        let Some(r) = pmf_ratio(signal, decoy, i)? else {
            continue;
        };
        if i == i_max && truncated && best.is_some_and(|b| r > b) {
            return Err(Error::TruncationUnsound { index: i_max });
        }
        best = Some(best.map_or(r, |b| b.max(r)));
    }
    let alpha = best.unwrap_or(0.0);
    debug_assert!(
        !same_analytic_shape(signal, decoy)
            || pmf_ratio(signal, decoy, 2)
                .ok()
                .flatten()
                .is_none_or(|r2| (alpha - r2).abs() <= 1e-12 * r2.max(1e-300)),
        "analytic decoy ratio is not maximal at i = 2"
    );
    Ok(alpha)
}

fn same_analytic_shape(a: &PhotonDistribution, b: &PhotonDistribution) -> bool {
    match (&a.shape, &b.shape) {
        (Shape::Poisson, Shape::Poisson) | (Shape::Thermal, Shape::Thermal) => true,
        (Shape::Binomial { n: x }, Shape::Binomial { n: y }) => x == y,
        _ => false,
    }
}

/// `P(1|decoy) / P(1|signal) > alpha`.
pub fn condition_one_holds(signal: &PhotonDistribution, decoy: &PhotonDistribution, alpha: f64) -> bool {
    let (ps, pd) = (signal.pmf(1), decoy.pmf(1));
    if ps > 0.0 {
        pd / ps > alpha
    } else {
        pd > 0.0
    }
}

/// `P(0|decoy) / P(0|signal) > P(1|decoy) / P(1|signal)`.
pub fn condition_two_holds(signal: &PhotonDistribution, decoy: &PhotonDistribution) -> Result<bool> {
    let (s0, s1) = (signal.pmf(0), signal.pmf(1));
    if s0 == 0.0 {
        return Err(Error::ZeroDenominator("P(0|signal) = 0"));
    }
    if s1 == 0.0 {
        return Err(Error::ZeroDenominator("P(1|signal) = 0"));
    }
    Ok(decoy.pmf(0) / s0 > decoy.pmf(1) / s1)
}

/// Signal/decoy distributions with their certified α.
#[derive(Debug, Clone)]
pub struct DecoyPair {
    signal: PhotonDistribution,
    decoy: PhotonDistribution,
    alpha: f64,
    signal_pmf: Vec<f64>,
    decoy_pmf: Vec<f64>,
}

impl DecoyPair {
    pub fn new(signal: PhotonDistribution, decoy: PhotonDistribution) -> Result<Self> {
        if !(signal.mean() > decoy.mean() && decoy.mean() > 0.0) {
            return Err(Error::InvalidPair {
                signal: signal.mean(),
                decoy: decoy.mean(),
            });
        }
        let i_max = signal.truncation_index().max(decoy.truncation_index()).max(2);
        let alpha = compute_alpha(&signal, &decoy, i_max)?;
        if !condition_one_holds(&signal, &decoy, alpha) {
            return Err(Error::ConditionViolated(
                "P(1|decoy)/P(1|signal) must exceed alpha",
            ));
        }
        let signal_pmf = (0..=i_max).map(|i| signal.pmf(i)).collect();
        let decoy_pmf = (0..=i_max).map(|i| decoy.pmf(i)).collect();
        Ok(DecoyPair {
            signal,
            decoy,
            alpha,
            signal_pmf,
            decoy_pmf,
        })
    }

    pub fn signal(&self) -> &PhotonDistribution {
        &self.signal
    }

    pub fn decoy(&self) -> &PhotonDistribution {
        &self.decoy
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Highest photon number carrying non-negligible mass in either setting.
    pub fn max_photons(&self) -> usize {
        self.signal_pmf.len() - 1
    }

    /// `P(i|k)`; the vacuum setting emits no photons.
    pub fn prob(&self, k: Intensity, i: usize) -> f64 {
        let (table, dist) = match k {
            Intensity::Signal => (&self.signal_pmf, &self.signal),
            Intensity::Decoy => (&self.decoy_pmf, &self.decoy),
            Intensity::Vacuum => return if i == 0 { 1.0 } else { 0.0 },
        };
        table.get(i).copied().unwrap_or_else(|| dist.pmf(i))
    }

    pub fn condition_one(&self) -> bool {
        condition_one_holds(&self.signal, &self.decoy, self.alpha)
    }

    pub fn condition_two(&self) -> Result<bool> {
        condition_two_holds(&self.signal, &self.decoy)
    }
}

/// Distribution description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
}

impl DistributionSpec {
    pub fn build(&self) -> Result<PhotonDistribution> {
        let need_mean = || self.mean.ok_or_else(|| Error::param("mean", "missing"));
        match self.family {
            Family::Poisson => PhotonDistribution::poisson(need_mean()?),
            Family::Thermal => PhotonDistribution::thermal(need_mean()?),
            Family::Binomial => {
                let n = self.n.ok_or_else(|| Error::param("n", "binomial needs `n`"))?;
                PhotonDistribution::binomial(need_mean()?, n)
            }
            Family::Tabulated => {
                let pmf = self
                    .pmf
                    .clone()
                    .ok_or_else(|| Error::param("pmf", "tabulated needs `pmf`"))?;
                let dist = PhotonDistribution::tabulated(pmf)?;
                match self.mean {
                    Some(m) => dist.with_mean(m),
                    None => Ok(dist),
                }
            }
        }
    }
}
