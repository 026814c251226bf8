//! One-dimensional parameter sweeps.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{resolve_axis, ConfigError, ScenarioConfig, SWEEP_AXES};
use crate::output::{commit, fmt_f64, Csv, Dataset};
use crate::run::{compute, config_json, manifest, unix_time, Command, Measurement, RunError};

/// Summary of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub peak_p1: f64,
    /// NaN without a target state.
    pub peak_fidelity: f64,
    /// Negativity at the designated measurement: the one with the highest
    /// fidelity when a target is set, otherwise the highest `P1`.
    pub negativity: f64,
    pub truncation_ok: bool,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(value: f64, error: String) -> Self {
        Self {
            value,
            peak_p1: f64::NAN,
            peak_fidelity: f64::NAN,
            negativity: f64::NAN,
            truncation_ok: false,
            error: Some(error),
        }
    }
}

/// Reduces measurement rows to one summary row.
pub fn summarize(value: f64, rows: &[Measurement], truncation_ok: bool) -> SweepRow {
    let peak_p1 = rows.iter().map(|m| m.populations[1]).fold(f64::NAN, f64::max);
    let peak_fidelity = rows.iter().filter_map(|m| m.fidelity).fold(f64::NAN, f64::max);
    // first maximum wins, so ties resolve to the earliest time
    let key = |m: &Measurement| m.fidelity.unwrap_or(m.populations[1]);
    let designated = rows
        .iter()
        .fold(None::<&Measurement>, |best, m| match best {
            Some(b) if key(b) >= key(m) => Some(b),
            _ => Some(m),
        });
    SweepRow {
        value,
        peak_p1,
        peak_fidelity,
        negativity: designated.map_or(f64::NAN, |m| m.negativity),
        truncation_ok,
        error: None,
    }
}

pub fn summary_csv(rows: &[SweepRow]) -> String {
    let mut csv = Csv::new(&["axis_value", "peak_p1", "peak_fidelity", "negativity", "truncation_ok"]);
    for r in rows {
        csv.row(&[
            fmt_f64(r.value),
            fmt_f64(r.peak_p1),
            fmt_f64(r.peak_fidelity),
            fmt_f64(r.negativity),
            r.truncation_ok.to_string(),
        ]);
    }
    csv.finish()
}

pub fn point_dir(i: usize) -> String {
    format!("point_{i:03}")
}

/// Result of a sweep, written or not.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub data: Dataset,
    pub rows: Vec<SweepRow>,
    /// Exit status of the first failed point, if any.
    pub first_failure: Option<i32>,
}

impl SweepOutcome {
    pub fn truncation_ok(&self) -> bool {
        self.rows.iter().all(|r| r.truncation_ok)
    }
}

/// Runs the base scenario once per value along `axis`, in parallel.
/// A failing point is recorded in the summary and does not stop the others.
pub fn compute_sweep(base: &ScenarioConfig, axis: &str, values: &[f64]) -> Result<SweepOutcome, RunError> {
    let path = resolve_axis(axis).ok_or_else(|| ConfigError::Invalid {
        field: axis.to_string(),
        line: None,
        reason: format!(
            "not a sweep axis; choose one of {}",
            SWEEP_AXES.iter().map(|(s, _)| *s).collect::<Vec<_>>().join(", ")
        ),
    })?;
    if values.is_empty() {
        return Err(ConfigError::Invalid {
            field: "values".into(),
            line: None,
            reason: "a sweep needs at least one value".into(),
        }
        .into());
    }
    if path.starts_with("drive.") && base.params.drive.is_continuous() {
        return Err(ConfigError::Invalid {
            field: path.to_string(),
            line: None,
            reason: "cannot sweep a pulse parameter under continuous drive".into(),
        }
        .into());
    }
    info!("sweeping {path} over {} values", values.len());

    let points: Vec<(Dataset, SweepRow, Option<i32>)> = values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let started = unix_time();
            let clock = Instant::now();
            let result = base
                .with_number(path, v)
                .map_err(RunError::from)
                .and_then(|cfg| compute(&cfg, Command::Evolve).map(|out| (cfg, out)));
            let mut data = Dataset::default();
            match result {
                Ok((cfg, mut out)) => {
                    let row = summarize(v, &out.measurements, out.truncation_ok);
                    out.data.add("config.toml", cfg.to_toml());
                    let text = manifest(&cfg, &out, None, clock.elapsed().as_secs_f64(), started);
                    out.data.add("manifest.json", text);
                    data.extend_under(&point_dir(i), out.data);
                    (data, row, None)
                }
                Err(e) => {
                    warn!("{path} = {v}: {e}");
                    (data, SweepRow::failed(v, e.to_string()), Some(e.exit_code()))
                }
            }
        })
        .collect();

    let mut data = Dataset::default();
    let mut rows = Vec::with_capacity(points.len());
    let mut first_failure = None;
    for (d, row, code) in points {
        data.files.extend(d.files);
        rows.push(row);
        first_failure = first_failure.or(code);
    }
    data.add("summary.csv", summary_csv(&rows));
    Ok(SweepOutcome { data, rows, first_failure })
}

/// Runs a sweep and writes every point plus `summary.csv` and a manifest.
pub fn run_sweep(base: &ScenarioConfig, axis: &str, values: &[f64]) -> Result<SweepOutcome, RunError> {
    let started = unix_time();
    let clock = Instant::now();
    let mut outcome = compute_sweep(base, axis, values)?;
    let points: Vec<_> = outcome
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "directory": point_dir(i),
                "value": r.value,
                "ok": r.error.is_none(),
                "error": r.error,
            })
        })
        .collect();
    let value = json!({
        "tool": "pulsedkerr",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "sweep",
        "axis": resolve_axis(axis),
        "values": values,
        "config": config_json(base),
        "started_unix_s": started,
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "truncation_ok": outcome.truncation_ok(),
        "points": points,
    });
    outcome.data.add("config.toml", base.to_toml());
    outcome
        .data
        .add("manifest.json", serde_json::to_string_pretty(&value).unwrap_or_default() + "\n");
    commit(&base.output.directory, &outcome.data)?;
    Ok(outcome)
}
