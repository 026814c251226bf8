//! Named scenarios. Pulse trains are centred at `kτ`, k = 1, 2, …, so
//! measurement times such as `kτ − 0.25T` fall just before a pulse peak.

use crate::config::{parse_config, ConfigError, ScenarioConfig};
use crate::run::Command;

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub command: Command,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1b",
        command: Command::Evolve,
        summary: "Rabi oscillations of P0 and P1 under continuous drive",
        text: r#"drive = "cw"

[model]
delta = -11.0
chi = 15.0
omega_re = 7.0

[run]
t_end = 5.0
sample_dt = 0.005
"#,
    },
    Preset {
        name: "fig2",
        command: Command::Steady,
        summary: "steady-state populations and Wigner function, numerical and closed form",
        text: r#"drive = "cw"

[model]
delta = -11.0
chi = 15.0
omega_re = 7.0
"#,
    },
    Preset {
        name: "fig3",
        command: Command::Evolve,
        summary: "Fock state |1> production by pulses, P1 peaks at k*tau - 0.25T",
        text: r#"[model]
delta = -15.0
chi = 15.0
omega_re = 6.0

[drive]
t0 = 5.5
tau = 5.5
width = 0.4
count = 4

[run]
t_end = 22.5
sample_dt = 0.01
measure_times = [5.4, 10.9, 16.4, 21.9]

[qsd]
dt = 0.001
n_traj = 1000
seed = 0
sample_dt = 0.05
"#,
    },
    Preset {
        name: "fig4",
        command: Command::Evolve,
        summary: "Wigner functions within the third pulse of the Fock-state train",
        text: r#"[model]
delta = -15.0
chi = 15.0
omega_re = 6.0

[drive]
t0 = 5.5
tau = 5.5
width = 0.4
count = 4

[run]
t_end = 16.5
sample_dt = 0.01
measure_times = [16.3, 16.34, 16.4]

[wigner]
times = [16.3, 16.34, 16.4]
"#,
    },
    Preset {
        name: "fig5",
        command: Command::Evolve,
        summary: "superposition (|0> - |1>)/sqrt(2): populations and fidelity",
        text: r#"[model]
delta = -11.0
chi = 15.0
omega_re = 7.0

[drive]
t0 = 2.2
tau = 2.2
width = 0.7
count = 5

[run]
t_end = 11.5
sample_dt = 0.01
measure_times = [1.85, 4.05, 6.25, 8.45, 10.65]

[target]
amplitudes = [[1.0, 0.0], [-1.0, 0.0]]
"#,
    },
    Preset {
        name: "fig6",
        command: Command::Evolve,
        summary: "Wigner functions within the fifth pulse of the superposition train",
        text: r#"[model]
delta = -11.0
chi = 15.0
omega_re = 7.0

[drive]
t0 = 2.2
tau = 2.2
width = 0.7
count = 5

[run]
t_end = 11.5
sample_dt = 0.01
measure_times = [10.02, 10.37, 10.72]

[wigner]
times = [10.02, 10.37, 10.72]

[target]
amplitudes = [[1.0, 0.0], [-1.0, 0.0]]
"#,
    },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

pub fn find_preset(name: &str) -> Result<&'static Preset, ConfigError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| ConfigError::UnknownPreset {
            name: name.to_string(),
            available: preset_names(),
        })
}

/// The scenario behind a preset name.
pub fn figure_preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    parse_config(find_preset(name)?.text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pulsedkerr::{Drive, C64};

    fn train(cfg: &ScenarioConfig) -> pulsedkerr::PulseTrain {
        match cfg.params.drive {
            Drive::Pulses(t) => t,
            Drive::ContinuousWave => panic!("expected pulses"),
        }
    }

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn every_preset_parses() {
        for p in PRESETS {
            figure_preset(p.name).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn fock_preset_parameters() {
        let cfg = figure_preset("fig3").unwrap();
        assert_eq!((cfg.params.delta, cfg.params.chi), (-15.0, 15.0));
        assert_eq!(cfg.params.omega, C64::new(6.0, 0.0));
        let t = train(&cfg);
        assert_eq!((t.tau, t.width, t.t0), (5.5, 0.4, 5.5));
        let want: Vec<f64> = (1..=4).map(|k| k as f64 * t.tau - 0.25 * t.width).collect();
        assert_close(&cfg.run.measure_times, &want);
    }

    #[test]
    fn wigner_times_sit_inside_the_pulses() {
        let cfg = figure_preset("fig4").unwrap();
        let t = train(&cfg);
        let want: Vec<f64> = [0.5, 0.4, 0.25].iter().map(|c| 3.0 * t.tau - c * t.width).collect();
        assert_close(&cfg.wigner.times, &want);

        let cfg = figure_preset("fig6").unwrap();
        let t = train(&cfg);
        let want: Vec<f64> = [1.4, 0.9, 0.4].iter().map(|c| 5.0 * t.tau - c * t.width).collect();
        assert_close(&cfg.wigner.times, &want);
    }

    #[test]
    fn superposition_preset_has_target() {
        let cfg = figure_preset("fig5").unwrap();
        assert_eq!((cfg.params.delta, cfg.params.chi), (-11.0, 15.0));
        let t = train(&cfg);
        assert_eq!((t.tau, t.width), (2.2, 0.7));
        let psi = cfg.target.unwrap();
        let h = 0.5f64.sqrt();
        assert!((psi.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((psi.amplitudes()[1].re + h).abs() < 1e-15);
        let want: Vec<f64> = (1..=5).map(|k| k as f64 * t.tau - 0.5 * t.width).collect();
        assert_close(&cfg.run.measure_times, &want);
    }

    #[test]
    fn steady_preset_is_continuous() {
        let cfg = figure_preset("fig2").unwrap();
        assert!(cfg.params.drive.is_continuous());
        assert!(matches!(find_preset("fig2").unwrap().command, Command::Steady));
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = figure_preset("fig9").unwrap_err();
        let msg = err.to_string();
        for name in preset_names() {
            assert!(msg.contains(name), "{msg}");
        }
    }
}
