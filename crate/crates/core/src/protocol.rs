//! Protocol-level vocabulary shared by every bound: bases, intensity
//! settings, the decoy scheme and the choice probabilities.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon::DecoyPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Key-generating basis.
    Z,
    /// Test basis.
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];
}

/// Intensity setting chosen by the transmitter for a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intensity {
    Signal,
    Decoy,
    Vacuum,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Signal, Intensity::Decoy, Intensity::Vacuum];
}

impl fmt::Display for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intensity::Signal => "signal",
            Intensity::Decoy => "decoy",
            Intensity::Vacuum => "vacuum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Signal, decoy and vacuum settings.
    #[serde(rename = "vw")]
    VacuumWeak,
    /// Signal and decoy settings only.
    #[serde(rename = "one-decoy")]
    OneDecoy,
}

impl Scheme {
    pub fn intensities(self) -> &'static [Intensity] {
        match self {
            Scheme::VacuumWeak => &Intensity::ALL,
            Scheme::OneDecoy => &Intensity::ALL[..2],
        }
    }

    /// Number of parameter-estimation failure events folded into `eps_sec`.
    pub fn pe_events(self) -> u32 {
        match self {
            Scheme::VacuumWeak => 18,
            Scheme::OneDecoy => 19,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::VacuumWeak => "vw",
            Scheme::OneDecoy => "one-decoy",
        })
    }
}

/// One value per intensity setting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerIntensity<T> {
    pub signal: T,
    pub decoy: T,
    pub vacuum: T,
}

impl<T> PerIntensity<T> {
    pub fn from_fn(mut f: impl FnMut(Intensity) -> T) -> Self {
        PerIntensity {
            signal: f(Intensity::Signal),
            decoy: f(Intensity::Decoy),
            vacuum: f(Intensity::Vacuum),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerIntensity<U> {
        PerIntensity {
            signal: f(&self.signal),
            decoy: f(&self.decoy),
            vacuum: f(&self.vacuum),
        }
    }
}

impl<T> Index<Intensity> for PerIntensity<T> {
    type Output = T;

    fn index(&self, k: Intensity) -> &T {
        match k {
            Intensity::Signal => &self.signal,
            Intensity::Decoy => &self.decoy,
            Intensity::Vacuum => &self.vacuum,
        }
    }
}

impl<T> IndexMut<Intensity> for PerIntensity<T> {
    fn index_mut(&mut self, k: Intensity) -> &mut T {
        match k {
            Intensity::Signal => &mut self.signal,
            Intensity::Decoy => &mut self.decoy,
            Intensity::Vacuum => &mut self.vacuum,
        }
    }
}

/// One value per basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerBasis<T> {
    pub z: T,
    pub x: T,
}

impl<T> PerBasis<T> {
    pub fn from_fn(mut f: impl FnMut(Basis) -> T) -> Self {
        PerBasis {
            z: f(Basis::Z),
            x: f(Basis::X),
        }
    }
}

impl<T> Index<Basis> for PerBasis<T> {
    type Output = T;

    fn index(&self, b: Basis) -> &T {
        match b {
            Basis::Z => &self.z,
            Basis::X => &self.x,
        }
    }
}

impl<T> IndexMut<Basis> for PerBasis<T> {
    fn index_mut(&mut self, b: Basis) -> &mut T {
        match b {
            Basis::Z => &mut self.z,
            Basis::X => &mut self.x,
        }
    }
}

/// Scheme selector and the transmitter's choice probabilities.
///
/// For the vacuum+weak scheme the vacuum probability is the remainder
/// `1 - p_signal - p_decoy`; for one-decoy the two settings must exhaust
/// the choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub scheme: Scheme,
    pub p_z: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
}

const SIMPLEX_TOL: f64 = 1e-12;

fn open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("{v} not in (0, 1)")))
    }
}

impl ProtocolConfig {
    pub fn new(scheme: Scheme, p_z: f64, p_signal: f64, p_decoy: f64) -> Result<Self> {
        open_unit("p_z", p_z)?;
        open_unit("p_mu", p_signal)?;
        open_unit("p_nu", p_decoy)?;
        let total = p_signal + p_decoy;
        match scheme {
            Scheme::VacuumWeak if total >= 1.0 => {
                return Err(Error::param(
                    "p_nu",
                    format!("p_mu + p_nu = {total} leaves no vacuum probability"),
                ))
            }
            Scheme::OneDecoy if (total - 1.0).abs() > SIMPLEX_TOL => {
                return Err(Error::param(
                    "p_nu",
                    format!("one-decoy requires p_mu + p_nu = 1, got {total}"),
                ))
            }
            _ => {}
        }
        Ok(ProtocolConfig {
            scheme,
            p_z,
            p_signal,
            p_decoy,
        })
    }

    pub fn p_vacuum(&self) -> f64 {
        match self.scheme {
            Scheme::VacuumWeak => 1.0 - self.p_signal - self.p_decoy,
            Scheme::OneDecoy => 0.0,
        }
    }

    pub fn intensity_prob(&self, k: Intensity) -> f64 {
        match k {
            Intensity::Signal => self.p_signal,
            Intensity::Decoy => self.p_decoy,
            Intensity::Vacuum => self.p_vacuum(),
        }
    }

    pub fn basis_prob(&self, b: Basis) -> f64 {
        match b {
            Basis::Z => self.p_z,
            Basis::X => 1.0 - self.p_z,
        }
    }

    /// Probability that both parties pick basis `b` and the transmitter picks `k`.
    pub fn choice_prob(&self, b: Basis, k: Intensity) -> f64 {
        let pb = self.basis_prob(b);
        pb * pb * self.intensity_prob(k)
    }

    pub fn intensities(&self) -> &'static [Intensity] {
        self.scheme.intensities()
    }

    /// τ_i: probability that a pulse carries exactly `i` photons, averaged
    /// over the intensity choice.
    pub fn tau(&self, pair: &DecoyPair, i: usize) -> f64 {
        self.intensities()
            .iter()
            .map(|&k| self.intensity_prob(k) * pair.prob(k, i))
            .sum()
    }
}
