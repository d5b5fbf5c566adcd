//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.

mod common;

use std::time::Instant;

use common::{observations, random_pair, SyntheticChannel, FAMILIES, SCHEMES};
use decoyqkd::asymptotic;
use decoyqkd::channel::{expected_observations, sampled_block, ScenarioParams};
use decoyqkd::cli::{self, GridSpec, Mode, RunConfig};
use decoyqkd::finite::{finite_bounds, SecurityParams};
use decoyqkd::optimize::{
    binomial_n_study, sweep, AnnealSchedule, ParameterVector, Problem, SourceFamily, SweepMode,
};
use decoyqkd::photon::{Family, PhotonDistribution};
use decoyqkd::protocol::{Basis, Intensity, PerBasis, ProtocolConfig, Scheme};
use decoyqkd::DecoyPair;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn report(criterion: u32, summary: &str, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {criterion}: {summary} ({detail})");
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn problem(scenario: ScenarioParams, source: SourceFamily, scheme: Scheme) -> Problem {
    Problem::new(scenario, source, scheme, 10_000_000, 1e-9, 1e-15).unwrap()
}

#[test]
fn criterion_1_asymptotic_soundness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tol = 1e-10;
    let mut violations = Vec::new();
    let mut trials = 0;
    for family in FAMILIES {
        for scheme in SCHEMES {
            for _ in 0..1000 {
                let pair = random_pair(&mut rng, family, scheme);
                let len = pair.max_photons() + 1;
                let channels = PerBasis {
                    z: SyntheticChannel::random(&mut rng, len),
                    x: SyntheticChannel::random(&mut rng, len),
                };
                let obs = observations(&pair, &channels);
                let bounds = asymptotic::bounds(&obs, scheme, &pair).unwrap();
                trials += 1;
                for b in Basis::ALL {
                    let (truth, bb) = (&channels[b], &bounds[b]);
                    let (y0, y1, e1) = (truth.yields[0], truth.yields[1], truth.errors[1]);
                    if y1 < bb.y1_low - tol
                        || y0 < bb.y0_low - tol
                        || y0 > bb.y0_high + tol
                        || e1 > bb.e1_high + tol
                    {
                        violations.push(format!("{family} {scheme:?} {b:?}: truth ({y0}, {y1}, {e1}) bounds {bb:?}"));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if let Some(v) = violations.first() {
        println!("first violation: {v}");
    }
    report(
        1,
        "asymptotic bound soundness",
        violations.is_empty() && secs < 30.0,
        &format!("{} violations over {trials} channel/pair draws, {secs:.1} s", violations.len()),
    );
}

#[test]
fn criterion_2_finite_soundness() {
    let start = Instant::now();
    let seeds = 500;
    let eps_pe = 0.01;
    let scenario = ScenarioParams::budget().with_attenuation(10.0);
    let mut worst = (0.0f64, String::new());
    let mut cells = 0;
    for scheme in SCHEMES {
        let sec = SecurityParams::new(scheme, eps_pe * f64::from(scheme.pe_events()), 1e-15, 1.2).unwrap();
        let (config, pairs) = match scheme {
            Scheme::VacuumWeak => (ProtocolConfig::new(scheme, 0.5, 0.5, 0.3).unwrap(), [(0.6, 0.15); 3]),
            Scheme::OneDecoy => (ProtocolConfig::new(scheme, 0.5, 0.6, 0.4).unwrap(), [(0.6, 0.15); 3]),
        };
        let sources = [SourceFamily::Poisson, SourceFamily::Thermal, SourceFamily::binomial(4)];
        for (source, (mu, nu)) in sources.iter().zip(pairs) {
            let pair = source.pair(mu, nu).unwrap();
            let mut counts = [[0u32; 4]; 2];
            for seed in 0..seeds {
                let block = sampled_block(&scenario, &config, &pair, 20_000_000, seed).unwrap();
                let truth = block.photon_events.unwrap();
                for (bi, b) in Basis::ALL.into_iter().enumerate() {
                    let fb = finite_bounds(&block.observations, &config, &pair, &sec, b).unwrap();
                    let t = truth[b];
                    let flags = [
                        (t.s1 as f64) < fb.s1_low,
                        (t.v1 as f64) > fb.v1_high,
                        (t.s0 as f64) < fb.s0_low,
                        (t.s0 as f64) > fb.s0_high,
                    ];
                    for (c, f) in counts[bi].iter_mut().zip(flags) {
                        *c += u32::from(f);
                    }
                }
            }
            for (bi, b) in Basis::ALL.into_iter().enumerate() {
                for (name, c) in ["s1>=s1L", "v1<=v1U", "s0>=s0L", "s0<=s0U"].iter().zip(counts[bi]) {
                    cells += 1;
                    let rate = f64::from(c) / seeds as f64;
                    println!("  {scheme:?} {:?} {b:?} {name}: {rate:.3}", source.family());
                    if rate >= worst.0 {
                        worst = (rate, format!("{scheme:?} {:?} {b:?} {name}", source.family()));
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "finite-key bound soundness",
        worst.0 <= 0.05 && secs < 300.0,
        &format!("worst violation rate {:.3} ({}) over {cells} cells, {seeds} seeds, {secs:.1} s", worst.0, worst.1),
    );
}

/// Textbook Poisson decoy formulas, coded without the generic machinery.
mod poisson {
    pub fn alpha(mu: f64, nu: f64) -> f64 {
        (mu - nu).exp() * (nu / mu).powi(2)
    }

    pub struct Gains {
        pub q_mu: f64,
        pub q_nu: f64,
        pub eq_mu: f64,
        pub eq_nu: f64,
    }

    pub fn y1_low(mu: f64, nu: f64, g: &Gains, y0: f64) -> f64 {
        mu / (mu * nu - nu * nu)
            * (g.q_nu * nu.exp() - g.q_mu * mu.exp() * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0)
    }

    pub fn e1_high_vw(nu: f64, g: &Gains, y0: f64, y1: f64) -> f64 {
        (g.eq_nu * nu.exp() - y0 / 2.0) / (nu * y1)
    }

    pub fn y0_low_onedecoy(mu: f64, nu: f64, g: &Gains) -> f64 {
        (mu * nu.exp() * g.q_nu - nu * mu.exp() * g.q_mu) / (mu - nu)
    }

    pub fn y0_high_onedecoy(mu: f64, g: &Gains) -> f64 {
        2.0 * g.eq_mu * mu.exp()
    }

    pub fn e1_high_onedecoy(mu: f64, nu: f64, g: &Gains, y1: f64) -> f64 {
        (mu.exp() * g.eq_mu - nu.exp() * g.eq_nu) / ((mu - nu) * y1)
    }
}

#[test]
fn criterion_3_poisson_specialization() {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let mut worst = (0.0f64, String::new());
    let mut points = 0;
    let mut note = |what: &str, generic: f64, special: f64| {
        let r = rel(generic, special);
        if r > worst.0 {
            worst = (r, format!("{what}: {generic} vs {special}"));
        }
    };
    for scheme in SCHEMES {
        for mu in [0.3, 0.5, 0.7, 0.9, 1.2] {
            for nu_frac in [0.05, 0.15, 0.3, 0.45, 0.6] {
                for db in [5.0, 25.0] {
                    let nu = mu * nu_frac;
                    let pair = DecoyPair::new(PhotonDistribution::poisson(mu).unwrap(), PhotonDistribution::poisson(nu).unwrap()).unwrap();
                    let config = match scheme {
                        Scheme::VacuumWeak => ProtocolConfig::new(scheme, 0.8, 0.6, 0.3).unwrap(),
                        Scheme::OneDecoy => ProtocolConfig::new(scheme, 0.8, 0.6, 0.4).unwrap(),
                    };
                    let obs = expected_observations(&ScenarioParams::high_end().with_attenuation(db), &config, &pair);
                    let b = asymptotic::bounds(&obs, scheme, &pair).unwrap().z;
                    let g = poisson::Gains {
                        q_mu: obs.gain(Basis::Z, Intensity::Signal),
                        q_nu: obs.gain(Basis::Z, Intensity::Decoy),
                        eq_mu: obs.error_gain(Basis::Z, Intensity::Signal),
                        eq_nu: obs.error_gain(Basis::Z, Intensity::Decoy),
                    };
                    note("alpha", pair.alpha(), poisson::alpha(mu, nu));
                    match scheme {
                        Scheme::VacuumWeak => {
                            let y0 = obs.gain(Basis::Z, Intensity::Vacuum);
                            let y1 = poisson::y1_low(mu, nu, &g, y0).clamp(0.0, 1.0);
                            note("vw y1", b.y1_low, y1);
                            note("vw e1", b.e1_high, poisson::e1_high_vw(nu, &g, y0, y1).clamp(0.0, 0.5));
                        }
                        Scheme::OneDecoy => {
                            let (low, high) = asymptotic::y0_bounds_onedecoy(&obs, &pair, Basis::Z).unwrap();
                            let y0l = poisson::y0_low_onedecoy(mu, nu, &g);
                            let y0h = poisson::y0_high_onedecoy(mu, &g);
                            note("od y0L raw", low.raw, y0l);
                            note("od y0U raw", high.raw, y0h);
                            let y0h = y0h.clamp(0.0, 1.0);
                            note("od y0L", b.y0_low, y0l.clamp(0.0, 1.0).min(y0h));
                            note("od y0U", b.y0_high, y0h);
                            let y1 = poisson::y1_low(mu, nu, &g, y0h).clamp(0.0, 1.0);
                            note("od y1", b.y1_low, y1);
                            note("od e1", b.e1_high, poisson::e1_high_onedecoy(mu, nu, &g, y1).clamp(0.0, 0.5));
                        }
                    }
                    points += 1;
                }
            }
        }
    }
    report(
        3,
        "Poisson specialization",
        worst.0 <= 1e-12,
        &format!("max relative deviation {:.2e} over {points} grid points; worst {}", worst.0, worst.1),
    );
}

#[test]
fn criterion_4_finite_to_asymptotic() {
    let mut ok = true;
    let mut details = Vec::new();
    for (scheme, params) in [
        (Scheme::VacuumWeak, ParameterVector { p_z: 0.9, p_mu: 0.7, p_nu: 0.2, mu: 0.5, nu: 0.1 }),
        (Scheme::OneDecoy, ParameterVector { p_z: 0.9, p_mu: 0.7, p_nu: 0.3, mu: 0.5, nu: 0.1 }),
    ] {
        let base = problem(ScenarioParams::high_end().with_attenuation(20.0), SourceFamily::Poisson, scheme);
        let r = base.asymptotic(&params).unwrap().per_detection();
        let mut fractions = Vec::new();
        for nz in [1_000_000u64, 10_000_000, 100_000_000, 1_000_000_000] {
            let p = Problem { n_z: nz, ..base.clone() };
            let e = p.evaluate(&params).unwrap();
            fractions.push(e.key.ell as f64 / e.observations.total_detections(Basis::Z));
        }
        let monotone = fractions.windows(2).all(|w| w[1] > w[0]);
        let gap = (r - fractions[3]) / r;
        ok &= monotone && gap.abs() <= 0.10 && fractions[3] <= r;
        details.push(format!("{scheme:?}: l/nZ {fractions:.4?} -> R {r:.4}, gap {:.1}%", 100.0 * gap));
    }
    report(4, "finite-key converges to asymptotic rate", ok, &details.join("; "));
}

fn ordering_fraction(scenario: &ScenarioParams, scheme: Scheme, grid: &[f64]) -> (usize, usize, Vec<[f64; 3]>) {
    let schedule = AnnealSchedule::default().with_seed(5);
    let rows: Vec<Vec<f64>> = [SourceFamily::binomial(2), SourceFamily::Poisson, SourceFamily::Thermal]
        .into_iter()
        .map(|s| {
            sweep(&problem(scenario.clone(), s, scheme), grid, &schedule, SweepMode::Warm)
                .unwrap()
                .iter()
                .map(|r| r.skr_bps)
                .collect()
        })
        .collect();
    let triples: Vec<[f64; 3]> = (0..grid.len()).map(|i| [rows[0][i], rows[1][i], rows[2][i]]).collect();
    let good = triples.iter().filter(|t| t[0] >= t[1] && t[1] >= t[2]).count();
    (good, grid.len(), triples)
}

#[test]
fn criterion_5_source_ordering() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=10).map(|i| 4.0 * f64::from(i)).collect();
    let mut ok = true;
    let mut details = Vec::new();
    for (name, scenario) in [("high_end", ScenarioParams::high_end()), ("budget", ScenarioParams::budget())] {
        for scheme in SCHEMES {
            let (good, total, triples) = ordering_fraction(&scenario, scheme, &grid);
            for (db, t) in grid.iter().zip(&triples) {
                println!("  {name} {scheme:?} {db:>4} dB: binomial2 {:.4e} poisson {:.4e} thermal {:.4e}", t[0], t[1], t[2]);
            }
            ok &= good as f64 >= 0.9 * total as f64;
            details.push(format!("{name}/{scheme:?} {good}/{total}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 1800.0;
    report(
        5,
        "binomial(2) >= Poisson >= thermal",
        ok,
        &format!("{}, {secs:.0} s", details.join(", ")),
    );
}

#[test]
fn criterion_6_binomial_boundary_mean() {
    let grid = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let p = problem(ScenarioParams::high_end(), SourceFamily::binomial(2), Scheme::VacuumWeak);
    let rows = sweep(&p, &grid, &AnnealSchedule::default().with_seed(6), SweepMode::Warm).unwrap();
    let mus: Vec<f64> = rows.iter().map(|r| r.params.mu).collect();
    let ok = mus.iter().all(|mu| (mu - 2.0).abs() <= 1e-3);
    report(6, "optimal mu = 2 for binomial(2) up to 5 dB", ok, &format!("mu over 0..5 dB: {mus:?}"));
}

#[test]
fn criterion_7_binomial_n_study() {
    let n_grid = [2, 4, 8, 16, 32, 64, 128, 256];
    let caps = [1.0, 0.1, 0.01];
    let p = problem(ScenarioParams::high_end().with_attenuation(20.0), SourceFamily::Poisson, Scheme::VacuumWeak);
    let schedule = AnnealSchedule::default().with_seed(7);
    let rows = binomial_n_study(&p, &n_grid, &caps, &schedule).unwrap();
    let baseline = decoyqkd::optimize::anneal(&p, &schedule, None).skr;
    let curve = |cap: f64| rows.iter().filter(|r| r.max_mu_over_n == cap).map(|r| r.skr_bps).collect::<Vec<_>>();
    let full = curve(1.0);
    let low = curve(0.01);
    let non_increasing = full.windows(2).all(|w| w[1] <= w[0] * 1.02);
    let rising = low[1] > low[0];
    let last: Vec<f64> = caps.iter().map(|&c| *curve(c).last().unwrap()).collect();
    let close = last.iter().all(|s| ((s - baseline) / baseline).abs() <= 0.05);
    for &c in &caps {
        println!("  cap {c}: {}", sci(&curve(c)));
    }
    report(
        7,
        "binomial-n trends approach Poisson",
        non_increasing && rising && close,
        &format!(
            "cap 1 non-increasing: {non_increasing}; cap 0.01 rises {:.3e} -> {:.3e}; n=256 {} vs Poisson {baseline:.4e}",
            low[0], low[1], sci(&last)
        ),
    );
}

#[test]
fn criterion_8_epsilon_bookkeeping() {
    let mut ok = true;
    for scheme in SCHEMES {
        let k = f64::from(match scheme {
            Scheme::VacuumWeak => 18u32,
            Scheme::OneDecoy => 19,
        });
        for eps_sec in [1e-12, 1e-9, 3.7e-7, 0.01, 0.5] {
            for eps_cor in [1e-15, 1e-9, 0.2] {
                let s = SecurityParams::new(scheme, eps_sec, eps_cor, 1.1).unwrap();
                ok &= s.eps_sec == eps_sec
                    && s.eps_pe == eps_sec / k
                    && (k * s.eps_pe - eps_sec).abs() <= f64::EPSILON * eps_sec
                    && s.eps_hash == eps_cor
                    && s.eps_cor == eps_cor;
            }
        }
    }
    report(8, "epsilon bookkeeping", ok, "eps_sec = 18 eps_PE (vw), 19 eps_PE (one-decoy), eps_cor = eps_hash");
}

#[test]
fn criterion_9_deterministic_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config = |out: &str| RunConfig {
        mode: Mode::Sweep,
        scenario: "high_end".into(),
        protocol: Scheme::OneDecoy,
        family: Family::Poisson,
        n: None,
        max_mu_over_n: None,
        pmf: None,
        attenuation_db: GridSpec::Range { start: 0.0, stop: 40.0, step: 10.0 },
        nz: 10_000_000,
        eps_sec: 1e-9,
        eps_cor: 1e-15,
        seed: 42,
        out: Some(dir.path().join(out)),
        params: None,
        n_grid: None,
        caps: None,
        schedule: None,
        parallel: false,
    };
    cli::run(&config("a.csv")).unwrap();
    cli::run(&config("b.csv")).unwrap();
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    report(9, "byte-identical sweep CSV", a == b && !a.is_empty(), &format!("{} bytes", a.len()));
}
