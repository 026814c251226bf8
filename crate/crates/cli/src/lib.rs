//! Command-line driver: scenario files, presets, sweeps and dataset output.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use config::{read_config, ScenarioConfig};
use presets::{find_preset, figure_preset, PRESETS};
use run::{run_scenario, Command, RunError};
use sweep::run_sweep;

/// Exit status when results were written but the basis looked too small.
pub const EXIT_TRUNCATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pulsedkerr", version, about = "Driven dissipative Kerr oscillator under Gaussian pulse trains")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Trajectory seed, overriding `qsd.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Basis dimension, overriding `model.nmax`.
    #[arg(long, global = true)]
    pub nmax: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Integrate the master equation and write time series.
    Evolve { config: PathBuf },
    /// Continuous-wave steady state, numerical and closed form.
    Steady { config: PathBuf },
    /// Wigner functions at `wigner.times`.
    Wigner { config: PathBuf },
    /// Quantum-state-diffusion ensemble.
    Traj { config: PathBuf },
    /// Repeat `evolve` along one parameter axis.
    Sweep {
        config: PathBuf,
        /// Parameter to vary, e.g. `chi` or `drive.width`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
    },
    /// Reproduce a named figure scenario.
    Figure {
        name: String,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        dump: bool,
    },
    /// List the available presets.
    Presets,
}

fn apply_overrides(mut cfg: ScenarioConfig, g: &GlobalOpts) -> Result<ScenarioConfig, RunError> {
    if let Some(n) = g.nmax {
        cfg = cfg.with_number("model.nmax", n as f64)?;
    }
    if let Some(seed) = g.seed {
        cfg = cfg.with_value("qsd.seed", toml::Value::Integer(seed as i64))?;
    }
    if let Some(out) = &g.out {
        cfg.output.directory = out.clone();
    }
    Ok(cfg)
}

fn single(cfg: ScenarioConfig, command: Command, preset: Option<&str>) -> Result<i32, RunError> {
    let report = run_scenario(&cfg, command, preset)?;
    info!("wrote {} files to {}", report.files.len(), report.directory.display());
    println!("{}", report.directory.display());
    Ok(if report.truncation_ok { 0 } else { EXIT_TRUNCATION })
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> Result<i32, RunError> {
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("thread pool already configured: {e}");
        }
    }
    let g = &cli.global;
    match cli.command {
        Sub::Evolve { config } => single(apply_overrides(read_config(&config)?, g)?, Command::Evolve, None),
        Sub::Steady { config } => single(apply_overrides(read_config(&config)?, g)?, Command::Steady, None),
        Sub::Wigner { config } => single(apply_overrides(read_config(&config)?, g)?, Command::Wigner, None),
        Sub::Traj { config } => single(apply_overrides(read_config(&config)?, g)?, Command::Traj, None),
        Sub::Sweep { config, axis, values } => {
            let cfg = apply_overrides(read_config(&config)?, g)?;
            let outcome = run_sweep(&cfg, &axis, &values)?;
            println!("{}", cfg.output.directory.display());
            Ok(match outcome.first_failure {
                Some(code) => code,
                None if outcome.truncation_ok() => 0,
                None => EXIT_TRUNCATION,
            })
        }
        Sub::Figure { name, dump } => {
            let preset = find_preset(&name)?;
            if dump {
                print!("{}", preset.text);
                return Ok(0);
            }
            let mut cfg = figure_preset(&name)?;
            cfg.output.directory = cfg.output.directory.join(&name);
            let cfg = apply_overrides(cfg, g)?;
            single(cfg, preset.command, Some(preset.name))
        }
        Sub::Presets => {
            for p in PRESETS {
                println!("{:<6}  {:<7} {}", p.name, p.command.name(), p.summary);
            }
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn sweep_values_accept_negatives() {
        let cli = Cli::try_parse_from(["pulsedkerr", "sweep", "a.toml", "--axis", "delta", "--values", "-11,-15.5"]).unwrap();
        match cli.command {
            Sub::Sweep { values, .. } => assert_eq!(values, vec![-11.0, -15.5]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn global_flags_follow_the_subcommand() {
        let cli = Cli::try_parse_from(["pulsedkerr", "figure", "fig3", "--nmax", "20", "--seed", "4"]).unwrap();
        assert_eq!((cli.global.nmax, cli.global.seed), (Some(20), Some(4)));
    }

    #[test]
    fn overrides_reach_the_scenario() {
        let cfg = figure_preset("fig3").unwrap();
        let g = GlobalOpts { out: Some("x".into()), seed: Some(7), nmax: Some(20), threads: None };
        let cfg = apply_overrides(cfg, &g).unwrap();
        assert_eq!(cfg.params.nmax, 20);
        assert_eq!(cfg.qsd.unwrap().seed, 7);
        assert_eq!(cfg.output.directory, PathBuf::from("x"));
    }
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/command-line.md")]
mod command_line_guide {}
