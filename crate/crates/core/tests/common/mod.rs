#![allow(dead_code)]

use decoyqkd::asymptotic::AsymptoticObservations;
use decoyqkd::photon::{DecoyPair, Family, PhotonDistribution};
use decoyqkd::protocol::{Basis, Intensity, PerBasis, PerIntensity, Scheme};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Per-photon-number yields and error rates, with `e_0 = 1/2`.
#[derive(Debug, Clone)]
pub struct SyntheticChannel {
    pub yields: Vec<f64>,
    pub errors: Vec<f64>,
}

impl SyntheticChannel {
    pub fn random(rng: &mut ChaCha8Rng, len: usize) -> Self {
        let mut yields = Vec::with_capacity(len);
        let mut errors = Vec::with_capacity(len);
        if rng.random_bool(0.5) {
            let eta = 10f64.powf(rng.random_range(-6.0..0.0));
            let y0 = 10f64.powf(rng.random_range(-9.0..-2.0));
            let ed = rng.random_range(0.0..0.1);
            for i in 0..len {
                let arrive = 1.0 - (1.0 - eta).powi(i as i32);
                let y = 1.0 - (1.0 - y0) * (1.0 - arrive);
                yields.push(y);
                errors.push(if i == 0 { 0.5 } else { (0.5 * y0 + ed * arrive) / y });
            }
        } else {
            for i in 0..len {
                yields.push(rng.random_range(0.0..1.0));
                errors.push(if i == 0 { 0.5 } else { rng.random_range(0.0..0.5) });
            }
        }
        SyntheticChannel { yields, errors }
    }

    pub fn gain(&self, pair: &DecoyPair, k: Intensity) -> (f64, f64) {
        let mut q = 0.0;
        let mut eq = 0.0;
        for i in 0..=pair.max_photons() {
            let p = pair.prob(k, i);
            q += p * self.yields[i];
            eq += p * self.yields[i] * self.errors[i];
        }
        (q, eq)
    }
}

pub fn observations(pair: &DecoyPair, channels: &PerBasis<SyntheticChannel>) -> AsymptoticObservations {
    let mut gains = PerBasis::<PerIntensity<f64>>::default();
    let mut errs = gains;
    for b in Basis::ALL {
        for k in Intensity::ALL {
            let (q, eq) = channels[b].gain(pair, k);
            gains[b][k] = q;
            errs[b][k] = if q > 0.0 { eq / q } else { 0.0 };
        }
    }
    AsymptoticObservations::new(gains, errs).unwrap()
}

fn random_pmf(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = rng.random_range(3..9);
    let mut w: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// A random pair of `family` satisfying the scheme's admissibility
/// conditions, by rejection.
pub fn random_pair(rng: &mut ChaCha8Rng, family: Family, scheme: Scheme) -> DecoyPair {
    loop {
        let candidate = match family {
            Family::Poisson => {
                let mu = rng.random_range(0.05..2.0);
                let nu = mu * rng.random_range(0.02..0.95);
                DecoyPair::new(PhotonDistribution::poisson(mu).unwrap(), PhotonDistribution::poisson(nu).unwrap())
            }
            Family::Thermal => {
                let mu = rng.random_range(0.05..2.0);
                let nu = mu * rng.random_range(0.02..0.95);
                DecoyPair::new(PhotonDistribution::thermal(mu).unwrap(), PhotonDistribution::thermal(nu).unwrap())
            }
            Family::Binomial => {
                let n = rng.random_range(2..64u32);
                let mu = rng.random_range(0.05..f64::from(n).min(3.0));
                let nu = mu * rng.random_range(0.02..0.95);
                DecoyPair::new(
                    PhotonDistribution::binomial(mu, n).unwrap(),
                    PhotonDistribution::binomial(nu, n).unwrap(),
                )
            }
            Family::Tabulated => {
                let base = PhotonDistribution::tabulated(random_pmf(rng)).unwrap();
                let decoy = base.attenuate(rng.random_range(0.02..0.95)).unwrap();
                DecoyPair::new(base, decoy)
            }
        };
        let Ok(pair) = candidate else { continue };
        if scheme == Scheme::OneDecoy && pair.condition_two() != Ok(true) {
            continue;
        }
        return pair;
    }
}

pub const FAMILIES: [Family; 4] = [Family::Poisson, Family::Thermal, Family::Binomial, Family::Tabulated];
pub const SCHEMES: [Scheme; 2] = [Scheme::VacuumWeak, Scheme::OneDecoy];
