//! Command-line front end.
//!
//! A run is described by a [`RunConfig`], read from a JSON file and/or
//! assembled from flags (flags win). Tables are written as CSV with every
//! float in 17-significant-digit scientific notation.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channel::ScenarioParams;
use crate::error::Error;
use crate::optimize::{
    anneal, binomial_n_study, sweep, AnnealSchedule, AsymptoticSummary, Evaluation, ParameterVector, Problem,
    SourceFamily, StudyRow, SweepMode, SweepRow,
};
use crate::photon::{Family, PhotonDistribution};
use crate::protocol::Scheme;

pub const SWEEP_HEADER: [&str; 9] = [
    "attenuation_db",
    "p_z",
    "p_mu",
    "p_nu",
    "mu",
    "nu",
    "skr_bps",
    "ell_bits",
    "phi_z_u",
];
pub const STUDY_HEADER: [&str; 3] = ["n", "max_mu_over_n", "skr_bps"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Evaluate,
    Optimize,
    Sweep,
    #[value(name = "binomial-n-study", alias = "binomial_n_study")]
    BinomialNStudy,
}

/// Attenuation values in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Single(f64),
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    /// Parses `a`, `a,b,c` or `start:stop:step`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number `{}`: {e}", s.trim()))
        };
        let parts: Vec<&str> = text.split(':').collect();
        match parts.len() {
            1 if text.trim().is_empty() => Ok(GridSpec::List(Vec::new())),
            1 if text.contains(',') => Ok(GridSpec::List(
                text.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_, _>>()?,
            )),
            1 => Ok(GridSpec::Single(num(text)?)),
            3 => Ok(GridSpec::Range {
                start: num(parts[0])?,
                stop: num(parts[1])?,
                step: num(parts[2])?,
            }),
            _ => Err(format!("grid `{text}` is not `a`, `a,b,...` or `start:stop:step`")),
        }
    }

    /// Grid points; ranges include `stop` when it lies on the lattice.
    pub fn points(&self) -> Result<Vec<f64>, String> {
        let pts = match self {
            GridSpec::Single(v) => vec![*v],
            GridSpec::List(v) => v.clone(),
            GridSpec::Range { start, stop, step } => {
                if !(*step > 0.0) || !step.is_finite() {
                    return Err(format!("step {step} must be positive"));
                }
                if !(start <= stop) {
                    return Err(format!("start {start} exceeds stop {stop}"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| start + i as f64 * step).collect()
            }
        };
        if pts.is_empty() {
            return Err("empty grid".into());
        }
        if let Some(v) = pts.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(format!("attenuation {v} must be finite and nonnegative"));
        }
        Ok(pts)
    }
}

fn default_nz() -> u64 {
    10_000_000
}
fn default_eps_sec() -> f64 {
    1e-9
}
fn default_eps_cor() -> f64 {
    1e-15
}
fn default_grid() -> GridSpec {
    GridSpec::Single(0.0)
}

/// Everything a run needs; the JSON config file has the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    /// Scenario file, or a bundled preset name (`high_end`, `budget`).
    pub scenario: String,
    pub protocol: Scheme,
    pub family: Family,
    /// Emitter count of a binomial source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Cap on the mean per emitter for binomial sources.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mu_over_n: Option<f64>,
    /// Emission pmf of a tabulated source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<f64>>,
    #[serde(default = "default_grid")]
    pub attenuation_db: GridSpec,
    #[serde(default = "default_nz")]
    pub nz: u64,
    #[serde(default = "default_eps_sec")]
    pub eps_sec: f64,
    #[serde(default = "default_eps_cor")]
    pub eps_cor: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Fixed protocol parameters for `evaluate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParameterVector>,
    /// Emitter counts for the binomial-n study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u32>>,
    /// Per-emitter caps for the binomial-n study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<AnnealSchedule>,
    /// Cold-start every sweep point concurrently instead of warm-starting.
    #[serde(default)]
    pub parallel: bool,
}

pub const DEFAULT_N_GRID: [u32; 8] = [2, 4, 8, 16, 32, 64, 128, 256];
pub const DEFAULT_CAPS: [f64; 3] = [1.0, 0.1, 0.01];

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn io_err(e: impl fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

pub fn resolve_scenario(spec: &str) -> Result<ScenarioParams, String> {
    if let Some(p) = ScenarioParams::preset(spec) {
        return Ok(p);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(format!("`{spec}` is neither a preset nor an existing file"));
    }
    ScenarioParams::load(path).map_err(|e| e.to_string())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("{e}"))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn source(&self) -> Result<SourceFamily, String> {
        Ok(match self.family {
            Family::Poisson => SourceFamily::Poisson,
            Family::Thermal => SourceFamily::Thermal,
            Family::Binomial => {
                let study_n = match self.mode {
                    Mode::BinomialNStudy => self.n_grid.as_ref().map_or(Some(DEFAULT_N_GRID[0]), |g| g.first().copied()),
                    _ => None,
                };
                let n = self.n.or(study_n).ok_or("n: binomial family needs an emitter count")?;
                if n == 0 {
                    return Err("n: emitter count must be positive".into());
                }
                let cap = self.max_mu_over_n.unwrap_or(1.0);
                if !(cap > 0.0 && cap <= 1.0) {
                    return Err(format!("max_mu_over_n: {cap} not in (0, 1]"));
                }
                SourceFamily::Binomial { n, max_emission: cap }
            }
            Family::Tabulated => {
                let pmf = self.pmf.clone().ok_or("pmf: tabulated family needs a pmf")?;
                SourceFamily::Tabulated {
                    base: PhotonDistribution::tabulated(pmf).map_err(|e| format!("pmf: {e}"))?,
                }
            }
        })
    }

    pub fn problem(&self) -> Result<Problem, String> {
        let scenario = resolve_scenario(&self.scenario).map_err(|e| format!("scenario: {e}"))?;
        if self.nz == 0 {
            return Err("nz: block size must be positive".into());
        }
        Problem::new(scenario, self.source()?, self.protocol, self.nz, self.eps_sec, self.eps_cor).map_err(|e| e.to_string())
    }

    pub fn schedule(&self) -> AnnealSchedule {
        self.schedule.unwrap_or_default().with_seed(self.seed)
    }

    /// Every problem found without running, as `(field, message)` pairs.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.to_string(),
                message,
            })
        };
        match resolve_scenario(&self.scenario) {
            Ok(s) => {
                for (f, m) in s.diagnostics() {
                    push(&format!("scenario.{f}"), m);
                }
            }
            Err(e) => push("scenario", e),
        }
        if let Err(e) = self.attenuation_db.points() {
            push("attenuation_db", e);
        }
        if self.nz == 0 {
            push("nz", "block size must be positive".into());
        }
        for (f, v) in [("eps_sec", self.eps_sec), ("eps_cor", self.eps_cor)] {
            if !(v > 0.0 && v < 1.0) {
                push(f, format!("{v} not in (0, 1)"));
            }
        }
        let source = self.source();
        if let Err(e) = &source {
            let (field, msg) = e.split_once(": ").unwrap_or(("family", e));
            push(field, msg.to_string());
        }
        if let Some(s) = &self.schedule {
            if let Err(e) = s.validate() {
                push("schedule", e.to_string());
            }
        }
        if self.mode == Mode::Evaluate && self.params.is_none() {
            push("params", "evaluate needs fixed protocol parameters".into());
        }
        if let Some(p) = &self.params {
            if let Err(e) = p.protocol(self.protocol) {
                push("params", e.to_string());
            }
            if !(p.mu > p.nu) {
                push(
                    "params.nu",
                    format!("decoy mean {} must be below signal mean {} (requires mu > nu)", p.nu, p.mu),
                );
            } else if !(p.nu > 0.0) {
                push("params.nu", format!("decoy mean {} must be positive", p.nu));
            }
            if let Ok(src) = &source {
                if let Some(cap) = src.mean_cap() {
                    if p.mu > cap {
                        let what = match src {
                            SourceFamily::Binomial { n, .. } => format!("n x max_mu_over_n = {n} x {}", cap / f64::from(*n)),
                            _ => "the tabulated mean".to_string(),
                        };
                        push("params.mu", format!("mean {} exceeds {what} = {cap}", p.mu));
                    }
                }
            }
        }
        if self.mode == Mode::BinomialNStudy {
            if let Some(g) = &self.n_grid {
                if g.is_empty() {
                    push("n_grid", "empty grid".into());
                } else if g.contains(&0) {
                    push("n_grid", "emitter counts must be positive".into());
                }
            }
            if let Some(c) = &self.caps {
                if c.is_empty() {
                    push("caps", "empty grid".into());
                }
                if let Some(v) = c.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                    push("caps", format!("{v} not in (0, 1]"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks a run config or a scenario file without running anything.
///
/// Files with a `mode` key are run configs; anything else is read as a
/// scenario. An empty list means the file is valid.
pub fn validate_config(path: &Path) -> Vec<Diagnostic> {
    let diag = |field: &str, message: String| {
        vec![Diagnostic {
            field: field.into(),
            message,
        }]
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return diag("path", format!("{}: {e}", path.display())),
    };
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return diag("json", e.to_string()),
    };
    if value.get("mode").is_some() {
        match RunConfig::from_json(&text) {
            Ok(cfg) => cfg.diagnostics(),
            Err(e) => diag("config", e),
        }
    } else {
        match serde_json::from_str::<ScenarioParams>(&text) {
            Ok(s) => s
                .diagnostics()
                .into_iter()
                .map(|(f, m)| Diagnostic {
                    field: f.into(),
                    message: m,
                })
                .collect(),
            Err(e) => diag("scenario", e.to_string()),
        }
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn sweep_record(r: &SweepRow) -> Vec<String> {
    let p = &r.params;
    let mut rec: Vec<String> = [r.attenuation_db, p.p_z, p.p_mu, p.p_nu, p.mu, p.nu, r.skr_bps]
        .into_iter()
        .map(fmt_float)
        .collect();
    rec.push(r.ell_bits.to_string());
    rec.push(fmt_float(r.phi_z_u));
    rec
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record(sweep_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_HEADER)?;
    for r in rows {
        w.write_record([r.n.to_string(), fmt_float(r.max_mu_over_n), fmt_float(r.skr_bps)])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed sweep-CSV line.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SweepRecord {
    pub attenuation_db: f64,
    pub p_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub mu: f64,
    pub nu: f64,
    pub skr_bps: f64,
    pub ell_bits: u64,
    pub phi_z_u: f64,
}

impl From<&SweepRow> for SweepRecord {
    fn from(r: &SweepRow) -> Self {
        SweepRecord {
            attenuation_db: r.attenuation_db,
            p_z: r.params.p_z,
            p_mu: r.params.p_mu,
            p_nu: r.params.p_nu,
            mu: r.params.mu,
            nu: r.params.nu,
            skr_bps: r.skr_bps,
            ell_bits: r.ell_bits,
            phi_z_u: r.phi_z_u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct StudyRecord {
    pub n: u32,
    pub max_mu_over_n: f64,
    pub skr_bps: f64,
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<SweepRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn read_study_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<StudyRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// JSON document printed by `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateReport {
    pub attenuation_db: f64,
    pub evaluation: Evaluation,
    pub asymptotic: Option<AsymptoticSummary>,
    /// Infinite-key secure bits per pulse sent, clamped at zero.
    pub asymptotic_rate_per_pulse: Option<f64>,
}

pub fn evaluate_report(problem: &Problem, params: &ParameterVector) -> crate::Result<EvaluateReport> {
    let evaluation = problem.evaluate(params)?;
    let asymptotic = problem.asymptotic(params).ok();
    let config = params.protocol(problem.scheme)?;
    Ok(EvaluateReport {
        attenuation_db: problem.scenario.attenuation_db,
        evaluation,
        asymptotic,
        asymptotic_rate_per_pulse: asymptotic.map(|a| (config.basis_prob(crate::Basis::Z).powi(2) * a.secret_fraction).max(0.0)),
    })
}

enum Output {
    Text(String),
    Bytes(Vec<u8>),
}

fn emit(out: &Option<PathBuf>, data: Output) -> Result<(), CliError> {
    let bytes = match data {
        Output::Text(s) => s.into_bytes(),
        Output::Bytes(b) => b,
    };
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| io_err(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(&bytes).map_err(io_err),
    }
}

/// Executes a run, writing results to `config.out` or stdout.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    if let Some(d) = config.diagnostics().first() {
        return Err(config_err(d));
    }
    let problem = config.problem().map_err(config_err)?;
    let grid = config.attenuation_db.points().map_err(config_err)?;
    let schedule = config.schedule();
    match config.mode {
        Mode::Evaluate => {
            let params = config.params.expect("checked by diagnostics");
            let &[db] = grid.as_slice() else {
                return Err(config_err("attenuation_db: evaluate takes a single value"));
            };
            let report = evaluate_report(&problem.at_attenuation(db), &params).map_err(|e| match e {
                Error::InvalidParameter { .. } => config_err(e),
                e => CliError::Infeasible(e.to_string()),
            })?;
            let mut text = serde_json::to_string_pretty(&report).map_err(io_err)?;
            text.push('\n');
            emit(&config.out, Output::Text(text))
        }
        Mode::Optimize | Mode::Sweep => {
            let rows = if config.mode == Mode::Optimize && grid.len() == 1 {
                let p = problem.at_attenuation(grid[0]);
                let outcome = anneal(&p, &schedule, config.params.as_ref());
                let eval = p.evaluate(&outcome.best).ok().filter(|_| outcome.feasible);
                vec![SweepRow {
                    attenuation_db: grid[0],
                    params: outcome.best,
                    skr_bps: outcome.skr.max(0.0),
                    ell_bits: eval.as_ref().map_or(0, |e| e.key.ell),
                    phi_z_u: eval.as_ref().map_or(0.5, |e| e.key.bounds.phi_z_high),
                    feasible: outcome.feasible,
                }]
            } else {
                let mode = if config.parallel { SweepMode::Parallel } else { SweepMode::Warm };
                sweep(&problem, &grid, &schedule, mode).map_err(config_err)?
            };
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf).map_err(io_err)?;
            emit(&config.out, Output::Bytes(buf))?;
            match rows.iter().find(|r| !r.feasible) {
                Some(r) => Err(CliError::Infeasible(format!(
                    "no admissible parameters found at {} dB",
                    r.attenuation_db
                ))),
                None => Ok(()),
            }
        }
        Mode::BinomialNStudy => {
            let &[db] = grid.as_slice() else {
                return Err(config_err("attenuation_db: the binomial-n study takes a single value"));
            };
            let problem = problem.at_attenuation(db);
            let n_grid = config.n_grid.clone().unwrap_or_else(|| DEFAULT_N_GRID.to_vec());
            let caps = config.caps.clone().unwrap_or_else(|| DEFAULT_CAPS.to_vec());
            let rows = binomial_n_study(&problem, &n_grid, &caps, &schedule).map_err(config_err)?;
            let baseline = anneal(&problem.with_source(SourceFamily::Poisson), &schedule, None);
            eprintln!("poisson baseline skr_bps={}", fmt_float(baseline.skr.max(0.0)));
            let mut buf = Vec::new();
            write_study_csv(&rows, &mut buf).map_err(io_err)?;
            emit(&config.out, Output::Bytes(buf))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Vw,
    OneDecoy,
}

impl From<ProtocolArg> for Scheme {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Vw => Scheme::VacuumWeak,
            ProtocolArg::OneDecoy => Scheme::OneDecoy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Poisson,
    Thermal,
    Binomial,
    Tabulated,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Thermal => Family::Thermal,
            FamilyArg::Binomial => Family::Binomial,
            FamilyArg::Tabulated => Family::Tabulated,
        }
    }
}

/// Decoy-state BB84 key rates for arbitrary photon statistics.
#[derive(Debug, Parser)]
#[command(name = "decoyqkd", version)]
pub struct Args {
    /// Validate a run config or scenario file and exit.
    #[arg(long, value_name = "FILE", conflicts_with = "config")]
    pub check: Option<PathBuf>,
    /// JSON run config; flags override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Scenario file or preset name (high_end, budget).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolArg>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Binomial emitter count.
    #[arg(long)]
    pub n: Option<u32>,
    /// Binomial cap on the mean per emitter.
    #[arg(long)]
    pub max_mu_over_n: Option<f64>,
    /// `a`, `a,b,...` or `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub attenuation_db: Option<String>,
    /// Z-basis detections per block.
    #[arg(long)]
    pub nz: Option<u64>,
    #[arg(long)]
    pub eps_sec: Option<f64>,
    #[arg(long)]
    pub eps_cor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fixed parameters as JSON, e.g. {"p_z":0.9,"p_mu":0.7,"p_nu":0.3,"mu":0.5,"nu":0.1}.
    #[arg(long)]
    pub params: Option<String>,
    /// Cold-start sweep points concurrently.
    #[arg(long)]
    pub parallel: bool,
}

impl Args {
    /// Merges the config file (if any) with explicit flags.
    pub fn into_config(self) -> Result<RunConfig, String> {
        let base = match &self.config {
            Some(path) => Some(RunConfig::load(path)?),
            None => None,
        };
        let need = |what: &str| format!("--{what} is required without --config");
        let mut cfg = match base {
            Some(c) => c,
            None => RunConfig {
                mode: self.mode.ok_or_else(|| need("mode"))?,
                scenario: self.scenario.clone().ok_or_else(|| need("scenario"))?,
                protocol: self.protocol.ok_or_else(|| need("protocol"))?.into(),
                family: self.family.ok_or_else(|| need("family"))?.into(),
                n: None,
                max_mu_over_n: None,
                pmf: None,
                attenuation_db: default_grid(),
                nz: default_nz(),
                eps_sec: default_eps_sec(),
                eps_cor: default_eps_cor(),
                seed: 0,
                out: None,
                params: None,
                n_grid: None,
                caps: None,
                schedule: None,
                parallel: false,
            },
        };
        if let Some(v) = self.mode {
            cfg.mode = v;
        }
        if let Some(v) = self.scenario {
            cfg.scenario = v;
        }
        if let Some(v) = self.protocol {
            cfg.protocol = v.into();
        }
        if let Some(v) = self.family {
            cfg.family = v.into();
        }
        if self.n.is_some() {
            cfg.n = self.n;
        }
        if self.max_mu_over_n.is_some() {
            cfg.max_mu_over_n = self.max_mu_over_n;
        }
        if let Some(g) = self.attenuation_db {
            cfg.attenuation_db = GridSpec::parse(&g).map_err(|e| format!("attenuation_db: {e}"))?;
        }
        if let Some(v) = self.nz {
            cfg.nz = v;
        }
        if let Some(v) = self.eps_sec {
            cfg.eps_sec = v;
        }
        if let Some(v) = self.eps_cor {
            cfg.eps_cor = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
        if let Some(p) = self.params {
            cfg.params = Some(serde_json::from_str(&p).map_err(|e| format!("params: {e}"))?);
        }
        cfg.parallel |= self.parallel;
        Ok(cfg)
    }
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args(args: Args) -> u8 {
    if let Some(path) = &args.check {
        let diags = validate_config(path);
        for d in &diags {
            eprintln!("{d}");
        }
        return if diags.is_empty() { 0 } else { 2 };
    }
    let config = match args.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    match run(&config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
