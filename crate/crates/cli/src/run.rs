//! Executes scenarios and renders their datasets.

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use pulsedkerr::evolve::{integrate_master_at, sample_grid, steady_state_with, RunDiagnostics, SteadyStateOptions};
use pulsedkerr::observe::{negativity_volume, wigner_analytic_steady, wigner_numeric};
use pulsedkerr::qsd::{average_ensemble, QsdConfig};
use pulsedkerr::{fidelity, mean_excitation, populations, DensityMatrix, PureState};
use serde_json::{json, Value};

use crate::config::{ConfigError, ScenarioConfig};
use crate::output::{commit, fmt_f64, wigner_csv, Csv, Dataset};

/// Populations written to the timeseries.
const LEVELS: usize = 4;

/// Top-two-level population above which a truncation is unreliable.
const TRUNCATION_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Steady,
    Wigner,
    Traj,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::Steady => "steady",
            Self::Wigner => "wigner",
            Self::Traj => "traj",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Solver(pulsedkerr::Error),
    Io(io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "configuration error: {e}"),
            Self::Solver(e) => write!(f, "solver error: {e}"),
            Self::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<pulsedkerr::Error> for RunError {
    fn from(e: pulsedkerr::Error) -> Self {
        Self::Solver(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

/// Observables at one designated measurement time.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub populations: [f64; LEVELS],
    pub mean_n: f64,
    pub fidelity: Option<f64>,
    pub negativity: f64,
}

/// Result of a computation, not yet written anywhere.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub data: Dataset,
    pub measurements: Vec<Measurement>,
    pub truncation_ok: bool,
    pub diagnostics: Value,
    pub notes: Vec<String>,
}

/// What [`run_scenario`] wrote.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub directory: PathBuf,
    pub files: Vec<String>,
    pub truncation_ok: bool,
}

fn low_populations(rho: &DensityMatrix) -> [f64; LEVELS] {
    let mut out = [0.0; LEVELS];
    for (slot, p) in out.iter_mut().zip(populations(rho)) {
        *slot = p;
    }
    out
}

fn top_population(rho: &DensityMatrix) -> f64 {
    let p = populations(rho);
    p[p.len() - 2..].iter().sum()
}

fn timeseries_header(with_fidelity: bool) -> Csv {
    let mut header = vec!["t", "p0", "p1", "p2", "p3", "mean_n"];
    if with_fidelity {
        header.push("fidelity");
    }
    Csv::new(&header)
}

fn timeseries_row(csv: &mut Csv, t: f64, rho: &DensityMatrix, target: Option<&PureState>) -> pulsedkerr::Result<()> {
    let mut row = vec![t];
    row.extend(low_populations(rho));
    row.push(mean_excitation(rho));
    if let Some(psi) = target {
        row.push(fidelity(rho, psi)?);
    }
    csv.numbers(&row);
    Ok(())
}

fn diagnostics_json(d: &RunDiagnostics) -> Value {
    json!({
        "accepted_steps": d.accepted_steps,
        "rejected_steps": d.rejected_steps,
        "renormalized_samples": d.renormalized_samples,
        "max_top_population": d.max_top_population,
        "max_trace_defect": d.max_trace_defect,
        "max_hermiticity_defect": d.max_hermiticity_defect,
        "min_eigenvalue": d.min_eigenvalue,
    })
}

/// Sorted union of time lists, merging points closer than 1e-12.
fn merge_times(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * a.abs().max(1.0));
    all
}

fn index_of(times: &[f64], t: f64) -> usize {
    match times.binary_search_by(|x| x.total_cmp(&t)) {
        Ok(i) => i,
        Err(i) => {
            // merged within tolerance: pick the nearer neighbour
            let lo = i.saturating_sub(1);
            let hi = i.min(times.len() - 1);
            if (times[lo] - t).abs() <= (times[hi] - t).abs() {
                lo
            } else {
                hi
            }
        }
    }
}

fn wigner_name(k: usize, t: f64) -> String {
    format!("wigner_{k:02}_t{t:.4}.csv")
}

fn measurements_csv(rows: &[Measurement], with_fidelity: bool) -> String {
    let mut header = vec!["t", "p0", "p1", "p2", "p3", "mean_n"];
    if with_fidelity {
        header.push("fidelity");
    }
    header.push("negativity");
    let mut csv = Csv::new(&header);
    for m in rows {
        let mut row = vec![m.t];
        row.extend(m.populations);
        row.push(m.mean_n);
        if let Some(f) = m.fidelity {
            row.push(f);
        }
        row.push(m.negativity);
        csv.numbers(&row);
    }
    csv.finish()
}

fn evolve(cfg: &ScenarioConfig, command: Command) -> Result<Outcome, RunError> {
    let p = &cfg.params;
    let wigner_only = command == Command::Wigner;
    if wigner_only && cfg.wigner.times.is_empty() {
        return Err(ConfigError::Invalid {
            field: "wigner.times".into(),
            line: None,
            reason: "`wigner` needs at least one evaluation time".into(),
        }
        .into());
    }
    let t_end = match cfg.run.t_end {
        Some(t) => t,
        None if wigner_only => cfg.wigner.times.iter().copied().fold(0.0, f64::max),
        None => cfg.require_t_end(command.name())?,
    };
    let grid = if wigner_only { Vec::new() } else { sample_grid(t_end, cfg.run.sample_dt) };
    let measure = if wigner_only { Vec::new() } else { cfg.measurement_times() };
    let wigner_times: &[f64] = if cfg.output.wigner || wigner_only { &cfg.wigner.times } else { &[] };
    let times = merge_times(&[&grid, &measure, wigner_times]);
    info!("{}: integrating to t = {t_end} ({} samples)", command.name(), times.len());
    let rho0 = DensityMatrix::fock(p.nmax, 0)?;
    let traj = integrate_master_at(&rho0, &times, p, &cfg.integrator)?;
    let target = cfg.target.as_ref();

    let mut data = Dataset::default();
    if cfg.output.timeseries && !wigner_only {
        let mut csv = timeseries_header(target.is_some());
        for &t in &grid {
            timeseries_row(&mut csv, t, &traj.states[index_of(&times, t)], target)?;
        }
        data.add("timeseries.csv", csv.finish());
    }

    let mut grids = Vec::new();
    for (k, &t) in wigner_times.iter().enumerate() {
        let w = wigner_numeric(&traj.states[index_of(&times, t)], &cfg.wigner.grid)?;
        data.add(wigner_name(k, t), wigner_csv(&w));
        grids.push((t, w));
    }

    let mut measurements = Vec::new();
    for &t in &measure {
        let rho = &traj.states[index_of(&times, t)];
        let negativity = match grids.iter().find(|(tw, _)| (tw - t).abs() <= 1e-12 * t.abs().max(1.0)) {
            Some((_, w)) => negativity_volume(w),
            None => negativity_volume(&wigner_numeric(rho, &cfg.wigner.grid)?),
        };
        measurements.push(Measurement {
            t,
            populations: low_populations(rho),
            mean_n: mean_excitation(rho),
            fidelity: target.map(|psi| fidelity(rho, psi)).transpose()?,
            negativity,
        });
    }
    if cfg.output.measurements && !measurements.is_empty() {
        data.add("measurements.csv", measurements_csv(&measurements, target.is_some()));
    }

    let mut truncation_ok = traj.diagnostics.truncation_ok();
    let mut diagnostics = json!({ "master": diagnostics_json(&traj.diagnostics) });
    if cfg.qsd.is_some() && !wigner_only {
        // cross-check the master equation with a trajectory ensemble
        let tables = ensemble(cfg, t_end)?;
        data.add("qsd_timeseries.csv", tables.series);
        data.add("qsd_stderr.csv", tables.stderr);
        truncation_ok &= tables.top < TRUNCATION_LIMIT;
        diagnostics["qsd"] = tables.diagnostics;
    }

    Ok(Outcome {
        command,
        data,
        measurements,
        truncation_ok,
        diagnostics,
        notes: Vec::new(),
    })
}

fn steady(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let p = &cfg.params;
    if !p.drive.is_continuous() {
        return Err(ConfigError::Invalid {
            field: "drive".into(),
            line: None,
            reason: "`steady` needs drive = \"cw\"".into(),
        }
        .into());
    }
    let (rho, diag) = steady_state_with(p, &cfg.integrator, &SteadyStateOptions::default())?;
    let mut data = Dataset::default();
    let mut csv = Csv::new(&["n", "p"]);
    for (n, pn) in populations(&rho).iter().enumerate() {
        csv.row(&[n.to_string(), fmt_f64(*pn)]);
    }
    data.add("populations.csv", csv.finish());

    let mut notes = vec![format!("mean_n = {}", fmt_f64(mean_excitation(&rho)))];
    if let Some(psi) = &cfg.target {
        notes.push(format!("fidelity = {}", fmt_f64(fidelity(&rho, psi)?)));
    }
    if cfg.output.wigner {
        let numeric = wigner_numeric(&rho, &cfg.wigner.grid)?;
        data.add("wigner_numeric.csv", wigner_csv(&numeric));
        if p.nbath == 0.0 && p.chi != 0.0 {
            let analytic = wigner_analytic_steady(p, &cfg.wigner.grid)?;
            let normalized = numeric.normalized();
            let peak = normalized.peak_magnitude().max(analytic.peak_magnitude());
            let gap = normalized.max_abs_diff(&analytic)? / peak;
            notes.push(format!("closed form vs numerical Wigner: max |dW| / peak = {gap:.3e}"));
            data.add("wigner_analytic.csv", wigner_csv(&analytic));
        } else {
            notes.push("closed-form Wigner function skipped: it needs chi != 0 and a zero-temperature bath".into());
        }
    }
    Ok(Outcome {
        command: Command::Steady,
        data,
        measurements: Vec::new(),
        truncation_ok: diag.truncation_ok(),
        diagnostics: diagnostics_json(&diag),
        notes,
    })
}

/// Ensemble averages rendered as `timeseries`/`stderr` tables.
struct EnsembleTables {
    series: String,
    stderr: String,
    top: f64,
    diagnostics: Value,
}

fn ensemble(cfg: &ScenarioConfig, t_end: f64) -> Result<EnsembleTables, RunError> {
    let p = &cfg.params;
    let qsd: QsdConfig = cfg.qsd.unwrap_or_default();
    info!("qsd: {} trajectories, dt = {}", qsd.n_traj, qsd.dt);
    let psi0 = PureState::fock(p.nmax, 0)?;
    let ens = average_ensemble(&psi0, t_end, p, &qsd)?;
    let target = cfg.target.as_ref();

    let mut series = timeseries_header(target.is_some());
    let mut errors = Csv::new(&["t", "stderr_p0", "stderr_p1", "stderr_p2", "stderr_p3"]);
    let mut top = 0.0_f64;
    for (k, &t) in ens.times.iter().enumerate() {
        let rho = &ens.mean_rho[k];
        timeseries_row(&mut series, t, rho, target)?;
        let mut row = vec![t];
        row.extend((0..LEVELS).map(|n| ens.stderr_pop[k].get(n).copied().unwrap_or(0.0)));
        errors.numbers(&row);
        top = top.max(top_population(rho));
    }
    Ok(EnsembleTables {
        series: series.finish(),
        stderr: errors.finish(),
        top,
        diagnostics: json!({
            "n_traj": qsd.n_traj,
            "dt": qsd.dt,
            "seed": qsd.seed,
            "sample_dt": qsd.sample_dt,
            "max_top_population": top,
        }),
    })
}

fn traj(cfg: &ScenarioConfig) -> Result<Outcome, RunError> {
    let t_end = cfg.require_t_end("traj")?;
    let tables = ensemble(cfg, t_end)?;
    let mut data = Dataset::default();
    data.add("timeseries.csv", tables.series);
    data.add("stderr.csv", tables.stderr);
    Ok(Outcome {
        command: Command::Traj,
        data,
        measurements: Vec::new(),
        truncation_ok: tables.top < TRUNCATION_LIMIT,
        diagnostics: tables.diagnostics,
        notes: Vec::new(),
    })
}

/// Runs `command` on `cfg` in memory.
pub fn compute(cfg: &ScenarioConfig, command: Command) -> Result<Outcome, RunError> {
    match command {
        Command::Evolve | Command::Wigner => evolve(cfg, command),
        Command::Steady => steady(cfg),
        Command::Traj => traj(cfg),
    }
}

pub(crate) fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub(crate) fn config_json(cfg: &ScenarioConfig) -> Value {
    serde_json::to_value(cfg.source()).unwrap_or(Value::Null)
}

/// Manifest for one finished computation.
pub fn manifest(cfg: &ScenarioConfig, outcome: &Outcome, preset: Option<&str>, wall: f64, started: u64) -> String {
    let value = json!({
        "tool": "pulsedkerr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": outcome.command.name(),
        "preset": preset,
        "config": config_json(cfg),
        "started_unix_s": started,
        "wall_time_s": wall,
        "truncation_ok": outcome.truncation_ok,
        "diagnostics": outcome.diagnostics,
        "notes": outcome.notes,
        "files": outcome.data.names(),
    });
    serde_json::to_string_pretty(&value).unwrap_or_default() + "\n"
}

/// Runs a scenario and writes its datasets and manifest into
/// `cfg.output.directory`. Nothing is written when the run fails.
pub fn run_scenario(cfg: &ScenarioConfig, command: Command, preset: Option<&str>) -> Result<RunReport, RunError> {
    let started = unix_time();
    let clock = Instant::now();
    let mut outcome = compute(cfg, command)?;
    if !outcome.truncation_ok {
        warn!("basis truncation looks unreliable; increase model.nmax");
    }
    outcome.data.add("config.toml", cfg.to_toml());
    let text = manifest(cfg, &outcome, preset, clock.elapsed().as_secs_f64(), started);
    outcome.data.add("manifest.json", text);
    commit(&cfg.output.directory, &outcome.data)?;
    Ok(RunReport {
        directory: cfg.output.directory.clone(),
        files: outcome.data.names(),
        truncation_ok: outcome.truncation_ok,
    })
}
