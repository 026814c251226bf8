//! Scenario documents: TOML with one table per section.
//!
//! ```toml
//! drive = "cw"            # or a [drive] table with t0, tau, width, count
//!
//! [model]
//! delta = -11.0
//! chi = 15.0
//! omega_re = 7.0
//! ```
//!
//! Every key can also be written dotted at top level (`model.delta = -11`).
//! Unknown keys are rejected, and validation errors name the offending
//! field together with its line.

use std::fmt;
use std::path::PathBuf;

use pulsedkerr::evolve::IntegratorConfig;
use pulsedkerr::model::DEFAULT_NMAX;
use pulsedkerr::observe::GridSpec;
use pulsedkerr::qsd::QsdConfig;
use pulsedkerr::{Drive, ModelParams, PulseTrain, PureState, C64};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// The document is not well-formed, or has a key of the wrong type or
    /// an unknown key.
    Parse {
        line: Option<usize>,
        message: String,
    },
    /// A value violates an invariant of the model or a solver setting.
    Invalid {
        field: String,
        line: Option<usize>,
        reason: String,
    },
    UnknownPreset {
        name: String,
        available: Vec<&'static str>,
    },
    Io {
        path: PathBuf,
        message: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse { line, message } => match line {
                Some(l) => write!(f, "line {l}: {message}"),
                None => write!(f, "{message}"),
            },
            Self::Invalid { field, line, reason } => match line {
                Some(l) => write!(f, "line {l}: invalid `{field}`: {reason}"),
                None => write!(f, "invalid `{field}`: {reason}"),
            },
            Self::UnknownPreset { name, available } => {
                write!(f, "unknown preset `{name}`; available: {}", available.join(", "))
            }
            Self::Io { path, message } => write!(f, "cannot read {}: {message}", path.display()),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    drive: Option<Value>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    integrator: RawIntegrator,
    qsd: Option<RawQsd>,
    #[serde(default)]
    wigner: RawWigner,
    target: Option<RawTarget>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    delta: f64,
    chi: f64,
    omega_re: f64,
    #[serde(default)]
    omega_im: f64,
    #[serde(default = "one")]
    gamma: f64,
    #[serde(default)]
    nbath: f64,
    #[serde(default = "default_nmax")]
    nmax: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulses {
    t0: Option<f64>,
    tau: f64,
    width: f64,
    count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    t_end: Option<f64>,
    sample_dt: f64,
    measure_times: Vec<f64>,
}

impl Default for RawRun {
    fn default() -> Self {
        Self {
            t_end: None,
            sample_dt: IntegratorConfig::default().sample_dt,
            measure_times: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawIntegrator {
    rel_tol: f64,
    abs_tol: f64,
    dt_init: f64,
    dt_max: f64,
    check_positivity: bool,
}

impl Default for RawIntegrator {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            dt_init: d.dt_init,
            dt_max: d.dt_max,
            check_positivity: d.check_positivity,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawQsd {
    dt: f64,
    n_traj: usize,
    seed: u64,
    sample_dt: f64,
}

impl Default for RawQsd {
    fn default() -> Self {
        let d = QsdConfig::default();
        Self {
            dt: d.dt,
            n_traj: d.n_traj,
            seed: d.seed,
            sample_dt: d.sample_dt,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawWigner {
    extent: f64,
    points: usize,
    times: Vec<f64>,
}

impl Default for RawWigner {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            extent: g.extent,
            points: g.points,
            times: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    /// `[re, im]` pairs for `|0⟩, |1⟩, …`; padded with zeros.
    amplitudes: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOutput {
    directory: PathBuf,
    timeseries: bool,
    wigner: bool,
    measurements: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            timeseries: true,
            wigner: true,
            measurements: true,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_nmax() -> usize {
    DEFAULT_NMAX
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub t_end: Option<f64>,
    pub sample_dt: f64,
    /// Designated measurement times for summaries.
    pub measure_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSpec {
    pub grid: GridSpec,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub timeseries: bool,
    pub wigner: bool,
    pub measurements: bool,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub run: RunSpec,
    pub integrator: IntegratorConfig,
    pub qsd: Option<QsdConfig>,
    pub wigner: WignerSpec,
    pub target: Option<PureState>,
    pub output: OutputSpec,
    /// The document the scenario was built from, with overrides applied.
    source: Table,
}

/// Parses and validates a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    build(table, Some(text))
}

pub fn read_config(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `section.key` in `text`, written either inside `[section]` or
/// dotted; falls back to the section header.
fn locate(text: &str, field: &str) -> Option<usize> {
    let (section, key) = field.split_once('.').unwrap_or(("", field));
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let full = if current.is_empty() {
            lhs.to_string()
        } else {
            format!("{current}.{lhs}")
        };
        if full == field || (section.is_empty() && lhs == key) {
            return Some(i + 1);
        }
    }
    header
}

fn deserialize<T: serde::de::DeserializeOwned>(
    value: Value,
    field: &str,
    text: Option<&str>,
) -> Result<T, ConfigError> {
    value.try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
        line: text.and_then(|t| locate(t, field)),
        message: format!("in `{field}`: {}", e.message()),
    })
}

/// Rebuilds a scenario from a document table, validating everything.
fn build(table: Table, text: Option<&str>) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = deserialize(Value::Table(table.clone()), "", text)?;
    let invalid = |field: &str, reason: String| ConfigError::Invalid {
        field: field.to_string(),
        line: text.and_then(|t| locate(t, field)),
        reason,
    };
    let core = |prefix: &str, err: pulsedkerr::Error| {
        let field = match &err {
            pulsedkerr::Error::InvalidParameter { name, .. } => match *name {
                "omega" => "model.omega_re".to_string(),
                "width" | "tau" | "count" | "t0" => format!("drive.{name}"),
                other => format!("{prefix}.{other}"),
            },
            pulsedkerr::Error::InvalidDimension { .. } => "model.nmax".to_string(),
            _ => prefix.to_string(),
        };
        let reason = match err {
            pulsedkerr::Error::InvalidParameter { reason, .. } => reason,
            other => other.to_string(),
        };
        invalid(&field, reason)
    };

    let drive = match raw.drive {
        None => Drive::ContinuousWave,
        Some(Value::String(s)) if s == "cw" => Drive::ContinuousWave,
        Some(Value::String(s)) => {
            return Err(invalid("drive", format!("expected \"cw\" or a pulse table, got \"{s}\"")))
        }
        Some(v @ Value::Table(_)) => {
            let pulses: RawPulses = deserialize(v, "drive", text)?;
            let mut train = PulseTrain::new(pulses.width, pulses.tau, pulses.count);
            if let Some(t0) = pulses.t0 {
                train = train.with_t0(t0);
            }
            Drive::Pulses(train)
        }
        Some(other) => {
            return Err(invalid("drive", format!("expected \"cw\" or a pulse table, got {other}")))
        }
    };

    let m = raw.model;
    let params = ModelParams::new(m.delta, m.chi, m.omega_re)
        .with_omega(C64::new(m.omega_re, m.omega_im))
        .with_gamma(m.gamma)
        .with_nbath(m.nbath)
        .with_nmax(m.nmax)
        .with_drive(drive);
    params.validate().map_err(|e| core("model", e))?;

    let run = RunSpec {
        t_end: raw.run.t_end,
        sample_dt: raw.run.sample_dt,
        measure_times: raw.run.measure_times,
    };
    if let Some(t_end) = run.t_end {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(invalid("run.t_end", format!("must be positive, got {t_end}")));
        }
    }
    let integrator = IntegratorConfig {
        rel_tol: raw.integrator.rel_tol,
        abs_tol: raw.integrator.abs_tol,
        dt_init: raw.integrator.dt_init,
        dt_max: raw.integrator.dt_max,
        sample_dt: run.sample_dt,
        check_positivity: raw.integrator.check_positivity,
    };
    integrator.validate().map_err(|e| match e {
        pulsedkerr::Error::InvalidParameter { name: "sample_dt", reason } => invalid("run.sample_dt", reason),
        other => core("integrator", other),
    })?;

    let qsd = raw.qsd.map(|q| QsdConfig {
        dt: q.dt,
        n_traj: q.n_traj,
        seed: q.seed,
        sample_dt: q.sample_dt,
    });
    if let Some(q) = &qsd {
        q.validate().map_err(|e| core("qsd", e))?;
    }

    let wigner = WignerSpec {
        grid: GridSpec {
            extent: raw.wigner.extent,
            points: raw.wigner.points,
        },
        times: raw.wigner.times,
    };
    wigner.grid.validate().map_err(|e| core("wigner", e))?;

    for (field, times) in [("run.measure_times", &run.measure_times), ("wigner.times", &wigner.times)] {
        for &t in times.iter() {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(invalid(field, format!("times must be finite and nonnegative, got {t}")));
            }
            if let Some(t_end) = run.t_end {
                if t > t_end {
                    return Err(invalid(field, format!("time {t} lies beyond run.t_end = {t_end}")));
                }
            }
        }
    }

    let target = match raw.target {
        None => None,
        Some(t) => {
            if t.amplitudes.len() > params.nmax {
                return Err(invalid(
                    "target.amplitudes",
                    format!("{} amplitudes exceed the basis size {}", t.amplitudes.len(), params.nmax),
                ));
            }
            let mut amps = vec![C64::new(0.0, 0.0); params.nmax];
            for (slot, [re, im]) in amps.iter_mut().zip(&t.amplitudes) {
                *slot = C64::new(*re, *im);
            }
            Some(PureState::new(amps).map_err(|e| invalid("target.amplitudes", e.to_string()))?)
        }
    };

    Ok(ScenarioConfig {
        params,
        run,
        integrator,
        qsd,
        wigner,
        target,
        output: OutputSpec {
            directory: raw.output.directory,
            timeseries: raw.output.timeseries,
            wigner: raw.output.wigner,
            measurements: raw.output.measurements,
        },
        source: table,
    })
}

/// Sweepable fields and their short names.
pub const SWEEP_AXES: &[(&str, &str)] = &[
    ("delta", "model.delta"),
    ("chi", "model.chi"),
    ("omega", "model.omega_re"),
    ("omega_re", "model.omega_re"),
    ("omega_im", "model.omega_im"),
    ("gamma", "model.gamma"),
    ("nbath", "model.nbath"),
    ("nmax", "model.nmax"),
    ("tau", "drive.tau"),
    ("width", "drive.width"),
    ("t0", "drive.t0"),
    ("count", "drive.count"),
    ("t_end", "run.t_end"),
];

const INTEGER_FIELDS: &[&str] = &["model.nmax", "drive.count", "qsd.n_traj", "qsd.seed", "wigner.points"];

/// Full dotted path of a sweep axis given by short or full name.
pub fn resolve_axis(axis: &str) -> Option<&'static str> {
    SWEEP_AXES
        .iter()
        .find(|(short, full)| *short == axis || *full == axis)
        .map(|(_, full)| *full)
}

impl ScenarioConfig {
    /// The document echoed as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.source).unwrap_or_default()
    }

    pub fn source(&self) -> &Table {
        &self.source
    }

    /// Copy with `path` (dotted) set to `value`, revalidated.
    pub fn with_value(&self, path: &str, value: Value) -> Result<Self, ConfigError> {
        let mut table = self.source.clone();
        let (section, key) = path.split_once('.').unwrap_or(("", path));
        let slot = if section.is_empty() {
            &mut table
        } else {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => t,
                _ => {
                    return Err(ConfigError::Invalid {
                        field: path.to_string(),
                        line: None,
                        reason: format!("`{section}` is not a table"),
                    })
                }
            }
        };
        slot.insert(key.to_string(), value);
        build(table, None)
    }

    /// Copy with the numeric field `path` set to `x`.
    pub fn with_number(&self, path: &str, x: f64) -> Result<Self, ConfigError> {
        let value = if INTEGER_FIELDS.contains(&path) {
            if x.fract() != 0.0 || !(x >= 0.0) || x > i64::MAX as f64 {
                return Err(ConfigError::Invalid {
                    field: path.to_string(),
                    line: None,
                    reason: format!("expected a nonnegative integer, got {x}"),
                });
            }
            Value::Integer(x as i64)
        } else {
            Value::Float(x)
        };
        self.with_value(path, value)
    }

    /// Numeric value at `path`, defaults included.
    pub fn number(&self, path: &str) -> Option<f64> {
        let p = &self.params;
        let train = match p.drive {
            Drive::Pulses(t) => Some(t),
            Drive::ContinuousWave => None,
        };
        Some(match path {
            "model.delta" => p.delta,
            "model.chi" => p.chi,
            "model.omega_re" => p.omega.re,
            "model.omega_im" => p.omega.im,
            "model.gamma" => p.gamma,
            "model.nbath" => p.nbath,
            "model.nmax" => p.nmax as f64,
            "drive.tau" => train?.tau,
            "drive.width" => train?.width,
            "drive.t0" => train?.t0,
            "drive.count" => train?.count as f64,
            "run.t_end" => self.run.t_end?,
            _ => return None,
        })
    }

    /// Time points for which summary quantities are tabulated: the
    /// configured measurement times, or the end of the run.
    pub fn measurement_times(&self) -> Vec<f64> {
        if self.run.measure_times.is_empty() {
            self.run.t_end.into_iter().collect()
        } else {
            self.run.measure_times.clone()
        }
    }

    pub fn require_t_end(&self, command: &str) -> Result<f64, ConfigError> {
        self.run.t_end.ok_or_else(|| ConfigError::Invalid {
            field: "run.t_end".into(),
            line: None,
            reason: format!("required by `{command}`"),
        })
    }
}
