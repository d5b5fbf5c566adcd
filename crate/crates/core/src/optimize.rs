//! Protocol-parameter optimization.
//!
//! [`Problem`] turns a parameter vector `(p_z, p_mu, p_nu, mu, nu)` into a
//! secret key rate through the expected-value channel model and the
//! finite-key bounds. [`anneal`] maximizes any such objective with
//! Metropolis simulated annealing followed by a compass-search polish, and
//! [`sweep`] / [`binomial_n_study`] repeat that over grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, AsymptoticBoundSet};
use crate::channel::{expected_counts, expected_observations, ExpectedBlock, ScenarioParams};
use crate::error::{Error, Result};
use crate::finite::{finite_key, ExpectedCounts, FiniteKey, SecurityParams};
use crate::photon::{DecoyPair, Family, PhotonDistribution};
use crate::protocol::{Basis, ProtocolConfig, Scheme};

/// Upper end of the signal-mean search box for sources without a natural cap.
pub const MU_SEARCH_MAX: f64 = 4.0;
/// Lower end of the decoy-mean search box.
pub const NU_MIN: f64 = 1e-4;
/// Smallest probability the search assigns to any basis or setting.
pub const PROB_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub p_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub mu: f64,
    pub nu: f64,
}

impl ParameterVector {
    pub fn protocol(&self, scheme: Scheme) -> Result<ProtocolConfig> {
        ProtocolConfig::new(scheme, self.p_z, self.p_mu, self.p_nu)
    }
}

/// The source whose mean the optimizer tunes.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceFamily {
    Poisson,
    Thermal,
    /// `n` emitters; the mean may not exceed `n * max_emission`.
    Binomial { n: u32, max_emission: f64 },
    /// A fixed emission shape that can only be attenuated.
    Tabulated { base: PhotonDistribution },
}

impl SourceFamily {
    pub fn binomial(n: u32) -> Self {
        SourceFamily::Binomial { n, max_emission: 1.0 }
    }

    pub fn family(&self) -> Family {
        match self {
            SourceFamily::Poisson => Family::Poisson,
            SourceFamily::Thermal => Family::Thermal,
            SourceFamily::Binomial { .. } => Family::Binomial,
            SourceFamily::Tabulated { .. } => Family::Tabulated,
        }
    }

    /// Largest admissible mean, if the source has one.
    pub fn mean_cap(&self) -> Option<f64> {
        match self {
            SourceFamily::Poisson | SourceFamily::Thermal => None,
            SourceFamily::Binomial { n, max_emission } => Some(f64::from(*n) * max_emission),
            SourceFamily::Tabulated { base } => Some(base.mean()),
        }
    }

    pub fn distribution(&self, mean: f64) -> Result<PhotonDistribution> {
        match self {
            SourceFamily::Poisson => PhotonDistribution::poisson(mean),
            SourceFamily::Thermal => PhotonDistribution::thermal(mean),
            SourceFamily::Binomial { n, max_emission } => {
                if mean > f64::from(*n) * max_emission {
                    return Err(Error::param(
                        "mu",
                        format!("mean {mean} exceeds {n} x max emission {max_emission}"),
                    ));
                }
                PhotonDistribution::binomial(mean, *n)
            }
            SourceFamily::Tabulated { base } => base.with_mean(mean),
        }
    }

    pub fn pair(&self, mu: f64, nu: f64) -> Result<DecoyPair> {
        DecoyPair::new(self.distribution(mu)?, self.distribution(nu)?)
    }
}

/// Everything but the tunable parameters: link, source, scheme, block size
/// and security targets.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scenario: ScenarioParams,
    pub source: SourceFamily,
    pub scheme: Scheme,
    /// Z-basis detections per block.
    pub n_z: u64,
    pub security: SecurityParams,
}

/// Full breakdown of one objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub params: ParameterVector,
    pub alpha: f64,
    pub pulses_sent: f64,
    pub acquisition_time: f64,
    pub observations: ExpectedCounts,
    pub key: FiniteKey,
    /// Bits per second.
    pub skr: f64,
}

/// Infinite-key figures at the same operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticSummary {
    pub bounds: AsymptoticBoundSet,
    /// Secure bits per matched Z-basis pulse.
    pub secret_fraction: f64,
    /// Z-basis detection probability per matched pulse.
    pub z_gain: f64,
}

impl AsymptoticSummary {
    /// Secure bits per Z-basis detection; the limit of `ell / n_Z`.
    pub fn per_detection(&self) -> f64 {
        self.secret_fraction / self.z_gain
    }
}

impl Problem {
    pub fn new(
        scenario: ScenarioParams,
        source: SourceFamily,
        scheme: Scheme,
        n_z: u64,
        eps_sec: f64,
        eps_cor: f64,
    ) -> Result<Self> {
        scenario.validate()?;
        let security = SecurityParams::new(scheme, eps_sec, eps_cor, scenario.error_correction_f)?;
        Ok(Problem {
            scenario,
            source,
            scheme,
            n_z,
            security,
        })
    }

    pub fn at_attenuation(&self, attenuation_db: f64) -> Self {
        Problem {
            scenario: self.scenario.with_attenuation(attenuation_db),
            ..self.clone()
        }
    }

    pub fn with_source(&self, source: SourceFamily) -> Self {
        Problem {
            source,
            ..self.clone()
        }
    }

    /// Protocol configuration and decoy pair, or the reason they are not
    /// admissible for this scheme.
    pub fn setup(&self, params: &ParameterVector) -> Result<(ProtocolConfig, DecoyPair)> {
        let config = params.protocol(self.scheme)?;
        let pair = self.source.pair(params.mu, params.nu)?;
        if self.scheme == Scheme::OneDecoy {
            match pair.condition_two() {
                Ok(true) => {}
                Ok(false) | Err(Error::ZeroDenominator(_)) => {
                    return Err(Error::ConditionViolated(
                        "one-decoy needs P(0|decoy)/P(0|signal) > P(1|decoy)/P(1|signal)",
                    ))
                }
                Err(e) => return Err(e),
            }
        }
        Ok((config, pair))
    }

    pub fn evaluate(&self, params: &ParameterVector) -> Result<Evaluation> {
        let (config, pair) = self.setup(params)?;
        let block = match expected_counts(&self.scenario, &config, &pair, self.n_z as f64) {
            Ok(b) => b,
            Err(Error::UnreachableTarget) => ExpectedBlock::default(),
            Err(e) => return Err(e),
        };
        let key = finite_key(&block.observations, &config, &pair, &self.security)?;
        let skr = if key.ell == 0 {
            0.0
        } else {
            key.ell as f64 / block.acquisition_time
        };
        Ok(Evaluation {
            params: *params,
            alpha: pair.alpha(),
            pulses_sent: block.pulses,
            acquisition_time: block.acquisition_time,
            observations: block.observations,
            key,
            skr,
        })
    }

    /// Secret key rate in bits per second; `-inf` for inadmissible parameters.
    pub fn objective(&self, params: &ParameterVector) -> f64 {
        self.evaluate(params).map_or(f64::NEG_INFINITY, |e| e.skr)
    }

    pub fn asymptotic(&self, params: &ParameterVector) -> Result<AsymptoticSummary> {
        let (config, pair) = self.setup(params)?;
        let obs = expected_observations(&self.scenario, &config, &pair);
        let bounds = asymptotic::bounds(&obs, self.scheme, &pair)?;
        let secret_fraction = asymptotic::secret_fraction(&obs, &config, &pair, &bounds, self.security.f);
        let z_gain = config
            .intensities()
            .iter()
            .map(|&k| config.intensity_prob(k) * obs.gain(Basis::Z, k))
            .sum();
        Ok(AsymptoticSummary {
            bounds,
            secret_fraction,
            z_gain,
        })
    }

    pub fn search_space(&self) -> SearchSpace {
        SearchSpace::new(self.scheme, self.source.mean_cap())
    }
}

/// Feasible box of the search, with the scheme's probability simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub scheme: Scheme,
    pub mu_max: f64,
    pub nu_min: f64,
    pub prob_min: f64,
}

const DIMS: usize = 5;
type Point = [f64; DIMS];

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl SearchSpace {
    pub fn new(scheme: Scheme, mean_cap: Option<f64>) -> Self {
        SearchSpace {
            scheme,
            mu_max: mean_cap.map_or(MU_SEARCH_MAX, |c| c.min(MU_SEARCH_MAX)),
            nu_min: NU_MIN,
            prob_min: PROB_MIN,
        }
    }

    // Coordinates: logit p_z, simplex logits (vs. vacuum for vw, vs. decoy
    // for one-decoy), ln mu, ln nu.
    fn bounds(&self) -> [(f64, f64); DIMS] {
        let l = logit(1.0 - self.prob_min);
        let means = (self.nu_min.ln(), self.mu_max.ln());
        [(-l, l), (-l, l), (-l, l), means, means]
    }

    fn active(&self, dim: usize) -> bool {
        !(dim == 2 && self.scheme == Scheme::OneDecoy)
    }

    fn decode(&self, u: &Point) -> ParameterVector {
        let b = self.bounds();
        let mean = |x: f64| {
            if x >= b[3].1 {
                self.mu_max
            } else if x <= b[3].0 {
                self.nu_min
            } else {
                x.exp()
            }
        };
        let (p_mu, p_nu) = match self.scheme {
            Scheme::VacuumWeak => {
                let (a, c) = (u[1].exp(), u[2].exp());
                let total = 1.0 + a + c;
                (a / total, c / total)
            }
            Scheme::OneDecoy => {
                let p = logistic(u[1]);
                (p, 1.0 - p)
            }
        };
        ParameterVector {
            p_z: logistic(u[0]),
            p_mu,
            p_nu,
            mu: mean(u[3]),
            nu: mean(u[4]),
        }
    }

    fn encode(&self, p: &ParameterVector) -> Point {
        let b = self.bounds();
        let (u1, u2) = match self.scheme {
            Scheme::VacuumWeak => {
                let vac = (1.0 - p.p_mu - p.p_nu).max(self.prob_min);
                ((p.p_mu / vac).ln(), (p.p_nu / vac).ln())
            }
            Scheme::OneDecoy => (logit(p.p_mu), 0.0),
        };
        let mut u = [logit(p.p_z), u1, u2, p.mu.ln(), p.nu.ln()];
        for (x, (lo, hi)) in u.iter_mut().zip(b) {
            *x = x.clamp(lo, hi);
        }
        u
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Point {
        let mut u = [0.0; DIMS];
        for (d, (lo, hi)) in self.bounds().into_iter().enumerate() {
            if self.active(d) {
                u[d] = rng.random_range(lo..hi);
            }
        }
        u
    }

    /// Pulls a parameter vector into the box (e.g. a warm start from a
    /// problem with a looser mean cap).
    pub fn project(&self, p: &ParameterVector) -> ParameterVector {
        self.decode(&self.encode(p))
    }
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    if width <= 0.0 {
        return lo;
    }
    let period = 2.0 * width;
    let y = (x - lo).rem_euclid(period);
    if y <= width {
        lo + y
    } else {
        hi - (y - width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    /// `None` uses the interquartile range of the objective over random
    /// feasible points.
    pub initial_temp: Option<f64>,
    pub cooling_factor: f64,
    pub steps_per_temp: usize,
    /// Final temperature as a fraction of the initial one.
    pub min_temp_ratio: f64,
    pub restarts: usize,
    pub rng_seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule {
            initial_temp: None,
            cooling_factor: 0.95,
            steps_per_temp: 200,
            min_temp_ratio: 1e-4,
            restarts: 3,
            rng_seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn with_seed(self, rng_seed: u64) -> Self {
        AnnealSchedule { rng_seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(Error::param("cooling_factor", "must lie in (0, 1)"));
        }
        if !(self.min_temp_ratio > 0.0 && self.min_temp_ratio < 1.0) {
            return Err(Error::param("min_temp_ratio", "must lie in (0, 1)"));
        }
        if self.steps_per_temp == 0 || self.restarts == 0 {
            return Err(Error::param("steps_per_temp", "steps and restarts must be positive"));
        }
        if let Some(t) = self.initial_temp {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::param("initial_temp", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Number of random points used to calibrate the initial temperature.
const CALIBRATION_POINTS: usize = 100;
/// Distance to a face, as a fraction of the box width, that triggers a probe.
const FACE_PROBE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Phase {
    Anneal { restart: usize },
    Polish,
}

/// State at the end of one temperature level (or one polish sweep).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub phase: Phase,
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealOutcome {
    pub best: ParameterVector,
    /// Best objective found; 0 when nothing feasible was visited.
    pub skr: f64,
    /// False when every evaluation was infeasible.
    pub feasible: bool,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
}

struct Tracker<F> {
    objective: F,
    evaluations: usize,
    best: Option<(Point, f64)>,
}

impl<F: Fn(&ParameterVector) -> f64> Tracker<F> {
    fn eval(&mut self, space: &SearchSpace, u: &Point) -> f64 {
        let v = (self.objective)(&space.decode(u));
        self.evaluations += 1;
        if v.is_finite() && self.best.is_none_or(|(_, b)| v > b) {
            self.best = Some((*u, v));
        }
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn best_value(&self) -> f64 {
        self.best.map_or(f64::NEG_INFINITY, |b| b.1)
    }
}

fn interquartile_range(values: &mut [f64]) -> f64 {
    if values.len() < 4 {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let q = |f: f64| values[((values.len() - 1) as f64 * f).round() as usize];
    q(0.75) - q(0.25)
}

/// Maximizes `objective` over `space`.
///
/// Proposals perturb every active coordinate with a Gaussian whose width
/// is proportional to the temperature and reflect at the box faces. Each
/// restart re-anneals from the best point so far. A final compass search
/// clamps moves to the box, so optima on a face are reached exactly.
pub fn anneal_objective<F>(
    objective: F,
    space: &SearchSpace,
    schedule: &AnnealSchedule,
    initial: Option<&ParameterVector>,
) -> AnnealOutcome
where
    F: Fn(&ParameterVector) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.rng_seed);
    let bounds = space.bounds();
    let mut t = Tracker {
        objective,
        evaluations: 0,
        best: None,
    };
    let mut trace = Vec::new();

    let mut feasible_values = Vec::with_capacity(CALIBRATION_POINTS);
    for _ in 0..CALIBRATION_POINTS {
        let u = space.random(&mut rng);
        let v = t.eval(space, &u);
        if v.is_finite() {
            feasible_values.push(v);
        }
    }
    let t0 = schedule.initial_temp.unwrap_or_else(|| {
        let iqr = interquartile_range(&mut feasible_values);
        if iqr > 0.0 {
            iqr
        } else {
            let scale = feasible_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale > 0.0 {
                0.1 * scale
            } else {
                1.0
            }
        }
    });
    let t_min = t0 * schedule.min_temp_ratio;

    let mut current = match initial {
        Some(p) => space.encode(p),
        None => t.best.map_or_else(|| space.random(&mut rng), |b| b.0),
    };
    let mut current_value = t.eval(space, &current);

    for restart in 0..schedule.restarts {
        if restart > 0 {
            if let Some((u, v)) = t.best {
                current = u;
                current_value = v;
            }
        }
        let mut temp = t0;
        while temp >= t_min {
            let width = 0.25 * temp / t0;
            for _ in 0..schedule.steps_per_temp {
                let mut cand = current;
                for (d, (lo, hi)) in bounds.iter().enumerate() {
                    if space.active(d) {
                        let z: f64 = rng.sample(StandardNormal);
                        cand[d] = reflect(cand[d] + width * (hi - lo) * z, *lo, *hi);
                    }
                }
                let v = t.eval(space, &cand);
                let accept = if v.is_finite() && !current_value.is_finite() {
                    true
                } else if !v.is_finite() {
                    false
                } else {
                    v >= current_value || rng.random::<f64>() < ((v - current_value) / temp).exp()
                };
                if accept {
                    current = cand;
                    current_value = v;
                }
            }
            trace.push(TraceEntry {
                phase: Phase::Anneal { restart },
                temperature: temp,
                current: current_value,
                best: t.best_value(),
                evaluations: t.evaluations,
            });
            temp *= schedule.cooling_factor;
        }
    }

    polish(&mut t, space, &mut trace);

    match t.best {
        Some((u, v)) => AnnealOutcome {
            best: space.decode(&u),
            skr: v,
            feasible: true,
            evaluations: t.evaluations,
            trace,
        },
        None => AnnealOutcome {
            best: space.decode(&current),
            skr: 0.0,
            feasible: false,
            evaluations: t.evaluations,
            trace,
        },
    }
}

/// Coordinate-wise pattern search around the best point, with moves
/// clamped to the box, then a probe of every face the result lies close to.
fn polish<F: Fn(&ParameterVector) -> f64>(t: &mut Tracker<F>, space: &SearchSpace, trace: &mut Vec<TraceEntry>) {
    let Some((mut x, mut fx)) = t.best else {
        return;
    };
    let bounds = space.bounds();
    let mut step: Point = bounds.map(|(lo, hi)| 0.05 * (hi - lo));
    let floor: Point = bounds.map(|(lo, hi)| 1e-9 * (hi - lo));
    loop {
        let mut improved = false;
        for d in (0..DIMS).filter(|&d| space.active(d)) {
            for dir in [1.0, -1.0] {
                let mut cand = x;
                cand[d] = (x[d] + dir * step[d]).clamp(bounds[d].0, bounds[d].1);
                if cand[d] == x[d] {
                    continue;
                }
                let v = t.eval(space, &cand);
                if v > fx {
                    x = cand;
                    fx = v;
                    improved = true;
                    break;
                }
            }
        }
        trace.push(TraceEntry {
            phase: Phase::Polish,
            temperature: 0.0,
            current: fx,
            best: t.best_value(),
            evaluations: t.evaluations,
        });
        if !improved {
            let mut done = true;
            for d in 0..DIMS {
                step[d] *= 0.5;
                done &= step[d] < floor[d];
            }
            if done {
                break;
            }
        }
    }
    for d in (0..DIMS).filter(|&d| space.active(d)) {
        let (lo, hi) = bounds[d];
        for face in [lo, hi] {
            if x[d] != face && (x[d] - face).abs() <= FACE_PROBE * (hi - lo) {
                let mut cand = x;
                cand[d] = face;
                let v = t.eval(space, &cand);
                if v >= fx {
                    x = cand;
                    fx = v;
                    t.best = Some((x, fx));
                }
            }
        }
    }
}

/// Anneals the key rate of `problem`.
pub fn anneal(problem: &Problem, schedule: &AnnealSchedule, initial: Option<&ParameterVector>) -> AnnealOutcome {
    anneal_objective(|p| problem.objective(p), &problem.search_space(), schedule, initial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Grid points in order, each starting from its predecessor's optimum.
    Warm,
    /// Independent cold starts evaluated concurrently.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub attenuation_db: f64,
    pub params: ParameterVector,
    pub skr_bps: f64,
    pub ell_bits: u64,
    pub phi_z_u: f64,
    pub feasible: bool,
}

fn point_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sweep_row(problem: &Problem, attenuation_db: f64, outcome: &AnnealOutcome) -> SweepRow {
    let (ell, phi) = match problem.evaluate(&outcome.best) {
        Ok(e) if outcome.feasible => (e.key.ell, e.key.bounds.phi_z_high),
        _ => (0, 0.5),
    };
    SweepRow {
        attenuation_db,
        params: outcome.best,
        skr_bps: outcome.skr.max(0.0),
        ell_bits: ell,
        phi_z_u: phi,
        feasible: outcome.feasible,
    }
}

/// Optimal key rate over an attenuation grid; rows come back in grid order.
pub fn sweep(problem: &Problem, attenuation_grid: &[f64], schedule: &AnnealSchedule, mode: SweepMode) -> Result<Vec<SweepRow>> {
    if attenuation_grid.is_empty() {
        return Err(Error::param("attenuation_db", "empty grid"));
    }
    schedule.validate()?;
    let run = |i: usize, db: f64, warm: Option<&ParameterVector>| {
        let p = problem.at_attenuation(db);
        let s = schedule.with_seed(point_seed(schedule.rng_seed, i));
        let outcome = anneal(&p, &s, warm);
        sweep_row(&p, db, &outcome)
    };
    Ok(match mode {
        SweepMode::Warm => {
            let mut rows: Vec<SweepRow> = Vec::with_capacity(attenuation_grid.len());
            for (i, &db) in attenuation_grid.iter().enumerate() {
                let warm = rows.last().filter(|r| r.feasible).map(|r| r.params);
                rows.push(run(i, db, warm.as_ref()));
            }
            rows
        }
        SweepMode::Parallel => attenuation_grid
            .par_iter()
            .enumerate()
            .map(|(i, &db)| run(i, db, None))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: u32,
    pub max_mu_over_n: f64,
    pub params: ParameterVector,
    pub skr_bps: f64,
}

/// Optimal key rate of binomial sources over emitter counts `n_grid`, for
/// each cap on the single-emitter firing probability.
///
/// Within one cap the grid is walked in order, warm-starting from the
/// previous optimum pulled into the new box.
pub fn binomial_n_study(
    problem: &Problem,
    n_grid: &[u32],
    caps: &[f64],
    schedule: &AnnealSchedule,
) -> Result<Vec<StudyRow>> {
    if n_grid.is_empty() || caps.is_empty() {
        return Err(Error::param("n_grid", "empty grid"));
    }
    if let Some(c) = caps.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
        return Err(Error::param("max_mu_over_n", format!("{c} not in (0, 1]")));
    }
    if n_grid.contains(&0) {
        return Err(Error::param("n", "emitter count must be positive"));
    }
    schedule.validate()?;
    let per_cap = |(ci, &cap): (usize, &f64)| {
        let mut rows = Vec::with_capacity(n_grid.len());
        let mut warm: Option<ParameterVector> = None;
        for (ni, &n) in n_grid.iter().enumerate() {
            let p = problem.with_source(SourceFamily::Binomial { n, max_emission: cap });
            let start = warm.map(|w| p.search_space().project(&w));
            let s = schedule.with_seed(point_seed(schedule.rng_seed, ci * n_grid.len() + ni));
            let outcome = anneal(&p, &s, start.as_ref());
            if outcome.feasible {
                warm = Some(outcome.best);
            }
            rows.push(StudyRow {
                n,
                max_mu_over_n: cap,
                params: outcome.best,
                skr_bps: outcome.skr.max(0.0),
            });
        }
        rows
    };
    let groups: Vec<Vec<StudyRow>> = caps.par_iter().enumerate().map(per_cap).collect();
    Ok(groups.into_iter().flatten().collect())
}
