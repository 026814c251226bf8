//! Deterministic integration of the Lindblad master equation
//!
//! ```text
//! dρ/dt = −i[H(t), ρ] + Σᵢ (Lᵢ ρ Lᵢ† − ½ Lᵢ†Lᵢ ρ − ½ ρ Lᵢ†Lᵢ)
//! ```
//!
//! The generator is applied in banded form (all operators are ladder
//! operators or diagonal), which costs O(n²) per evaluation instead of the
//! O(n³) of dense matrix products.
//!
//! Time stepping uses the Dormand–Prince 5(4) pair with a PI step-size
//! controller. The state is carried in the interaction picture of the
//! diagonal part `Δn + χn²`, `ρ̃_nm = e^{i(E_n − E_m)t} ρ_nm`. In the lab
//! frame the empty top levels of the basis (`χn²` of order 10⁴ at
//! `n_max = 50`) would force explicit steps far below anything the
//! populated levels need.

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{hermiticity_defect, DensityMatrix, DensityTolerance, C64};
use crate::model::{Drive, ModelParams};

/// Smallest step before the integrator gives up.
pub const MIN_STEP: f64 = 1e-12;

/// Trace drift above which a sampled state is rescaled.
pub const TRACE_RENORM_THRESHOLD: f64 = 1e-10;

/// Population of the top two levels above which a run is flagged.
pub const TRUNCATION_LIMIT: f64 = 1e-8;

/// Checks applied to every stored sample.
pub const SAMPLE_TOLERANCE: DensityTolerance = DensityTolerance {
    hermiticity: 1e-8,
    trace: 1e-6,
    positivity: 1e-8,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    /// Spacing of stored samples.
    pub sample_dt: f64,
    /// Run the eigenvalue positivity check on every sample.
    pub check_positivity: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            dt_init: 1e-3,
            dt_max: 0.1,
            sample_dt: 0.01,
            check_positivity: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("dt_init", self.dt_init)?;
        positive("dt_max", self.dt_max)?;
        positive("sample_dt", self.sample_dt)?;
        if self.dt_max < self.dt_init {
            return Err(Error::InvalidParameter {
                name: "dt_max",
                reason: format!("dt_max {} is below dt_init {}", self.dt_max, self.dt_init),
            });
        }
        Ok(())
    }
}

/// Health of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunDiagnostics {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Samples whose trace had to be rescaled.
    pub renormalized_samples: usize,
    /// Largest top-two-level population seen at any sample.
    pub max_top_population: f64,
    pub max_trace_defect: f64,
    pub max_hermiticity_defect: f64,
    /// Smallest eigenvalue over all samples, when positivity was checked.
    pub min_eigenvalue: Option<f64>,
}

impl RunDiagnostics {
    pub fn truncation_ok(&self) -> bool {
        self.max_top_population < TRUNCATION_LIMIT
    }
}

/// Density matrices sampled along a master-equation run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: RunDiagnostics,
}

impl Trajectory {
    /// Index of the sample closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(i, _)| i)
    }

    pub fn state_at(&self, t: f64) -> Option<&DensityMatrix> {
        self.nearest(t).map(|i| &self.states[i])
    }

    /// `P_n(t)` at every sample.
    pub fn population_series(&self, level: usize) -> Vec<f64> {
        self.states
            .iter()
            .map(|rho| {
                if level < rho.dim() {
                    rho.matrix()[(level, level)].re
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Banded form of the master-equation generator for one parameter set.
#[derive(Debug, Clone)]
pub(crate) struct Generator {
    dim: usize,
    energies: Vec<f64>,
    /// `sqrt[n] = √n` for `n ≤ dim`.
    sqrt: Vec<f64>,
    omega: C64,
    drive: Drive,
    decay: f64,
    pump: f64,
}

impl Generator {
    pub(crate) fn new(p: &ModelParams) -> Result<Self> {
        p.validate()?;
        Ok(Self {
            dim: p.nmax,
            energies: p.free_energies(),
            sqrt: (0..=p.nmax).map(|n| (n as f64).sqrt()).collect(),
            omega: p.omega,
            drive: p.drive,
            decay: (p.nbath + 1.0) * p.gamma,
            pump: p.nbath * p.gamma,
        })
    }

    /// Writes the generator applied to `rho` into `out`. With
    /// `include_free = false` the `−i[Δn + χn², ρ]` term is left out.
    fn apply(&self, rho: &[C64], f: f64, include_free: bool, out: &mut [C64]) {
        let d = self.dim;
        let s = &self.sqrt;
        let w = self.omega * f;
        let wc = w.conj();
        let minus_i = C64::new(0.0, -1.0);
        // aa† in the truncated basis is diag(1, …, d−1, 0).
        let aad = |n: usize| if n + 1 < d { (n + 1) as f64 } else { 0.0 };
        // column-major: (n, m) -> n + m·d
        for m in 0..d {
            for n in 0..d {
                let at = |i: usize, j: usize| rho[i + j * d];
                let r = at(n, m);

                // [V, ρ] with V = Ω a† + Ω* a
                let mut vr = C64::new(0.0, 0.0);
                if n > 0 {
                    vr += w * s[n] * at(n - 1, m);
                }
                if n + 1 < d {
                    vr += wc * s[n + 1] * at(n + 1, m);
                }
                let mut rv = C64::new(0.0, 0.0);
                if m + 1 < d {
                    rv += w * s[m + 1] * at(n, m + 1);
                }
                if m > 0 {
                    rv += wc * s[m] * at(n, m - 1);
                }
                let mut acc = minus_i * (vr - rv);
                if include_free {
                    acc += minus_i * (self.energies[n] - self.energies[m]) * r;
                }

                let mut jump = C64::new(0.0, 0.0);
                if n + 1 < d && m + 1 < d {
                    jump += self.decay * s[n + 1] * s[m + 1] * at(n + 1, m + 1);
                }
                let mut loss = 0.5 * self.decay * (n + m) as f64;
                if self.pump > 0.0 {
                    if n > 0 && m > 0 {
                        jump += self.pump * s[n] * s[m] * at(n - 1, m - 1);
                    }
                    loss += 0.5 * self.pump * (aad(n) + aad(m));
                }
                acc += jump - loss * r;
                out[n + m * d] = acc;
            }
        }
    }
}

/// Right-hand side `dρ/dt` of the master equation at time `t`.
pub fn lindblad_rhs(rho: &DensityMatrix, t: f64, p: &ModelParams) -> Result<DMatrix<C64>> {
    if rho.dim() != p.nmax {
        return Err(Error::DimensionMismatch {
            expected: p.nmax,
            found: rho.dim(),
        });
    }
    let gen = Generator::new(p)?;
    let mut out = DMatrix::zeros(p.nmax, p.nmax);
    gen.apply(
        rho.matrix().as_slice(),
        p.drive.envelope(t),
        true,
        out.as_mut_slice(),
    );
    Ok(out)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// B − B̂ (embedded fourth-order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;
const MAX_GROWTH: f64 = 10.0;
const MIN_SHRINK: f64 = 0.2;

/// Stateful adaptive stepper for one run. Not shared between threads;
/// independent runs each own one.
pub(crate) struct Stepper {
    gen: Generator,
    cfg: IntegratorConfig,
    t: f64,
    /// Interaction-picture state.
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    k1_valid: bool,
    stage: Vec<C64>,
    y_new: Vec<C64>,
    dt: f64,
    err_prev: f64,
    pub(crate) diagnostics: RunDiagnostics,
}

impl Stepper {
    pub(crate) fn new(rho0: &DensityMatrix, p: &ModelParams, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        if rho0.dim() != p.nmax {
            return Err(Error::DimensionMismatch {
                expected: p.nmax,
                found: rho0.dim(),
            });
        }
        let gen = Generator::new(p)?;
        let len = p.nmax * p.nmax;
        let zeros = || vec![C64::new(0.0, 0.0); len];
        Ok(Self {
            gen,
            cfg,
            t: 0.0,
            y: rho0.matrix().as_slice().to_vec(),
            k: std::array::from_fn(|_| zeros()),
            k1_valid: false,
            stage: zeros(),
            y_new: zeros(),
            dt: cfg.dt_init,
            err_prev: 1e-4,
            diagnostics: RunDiagnostics::default(),
        })
    }

    pub(crate) fn time(&self) -> f64 {
        self.t
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.gen
            .energies
            .iter()
            .map(|e| C64::from_polar(1.0, e * t))
            .collect()
    }

    /// Interaction-picture derivative at `t` of state `y`.
    fn rhs(&self, t: f64, y: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        let d = self.gen.dim;
        let u = self.phases(t);
        scratch.resize(d * d, C64::new(0.0, 0.0));
        for m in 0..d {
            for n in 0..d {
                scratch[n + m * d] = y[n + m * d] * u[n].conj() * u[m];
            }
        }
        self.gen
            .apply(scratch, self.gen.drive.envelope(t), false, out);
        for m in 0..d {
            for n in 0..d {
                out[n + m * d] *= u[n] * u[m].conj();
            }
        }
    }

    /// Largest step allowed from `t` by the pulse structure of the drive.
    fn drive_limit(&self, t: f64) -> f64 {
        match &self.gen.drive {
            Drive::ContinuousWave => f64::INFINITY,
            Drive::Pulses(train) => {
                if train.in_window(t) {
                    train.width / 10.0
                } else {
                    match train.next_window_start(t) {
                        Some(start) if start - t > MIN_STEP => start - t,
                        // about to enter a window
                        Some(_) => train.width / 10.0,
                        None => f64::INFINITY,
                    }
                }
            }
        }
    }

    /// Steps until `self.t == target` exactly.
    pub(crate) fn advance_to(&mut self, target: f64) -> Result<()> {
        let mut scratch = Vec::new();
        while self.t < target {
            let remaining = target - self.t;
            let limit = self.cfg.dt_max.min(self.drive_limit(self.t));
            let mut h = self.dt.min(limit);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h < MIN_STEP && !last {
                return Err(Error::StepUnderflow { t: self.t, dt: h });
            }

            if !self.k1_valid {
                let mut tmp = std::mem::take(&mut self.k[0]);
                self.rhs(self.t, &self.y, &mut tmp, &mut scratch);
                self.k[0] = tmp;
                self.k1_valid = true;
            }
            let err = self.try_step(h, &mut scratch);

            if err <= 1.0 {
                self.t = if last { target } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                // first-same-as-last
                self.k.swap(0, 6);
                self.diagnostics.accepted_steps += 1;
                let factor = if err == 0.0 {
                    MAX_GROWTH
                } else {
                    (SAFETY * err.powf(-PI_ALPHA) * self.err_prev.powf(PI_BETA))
                        .clamp(MIN_SHRINK, MAX_GROWTH)
                };
                self.err_prev = err.max(1e-4);
                // Keep the controller's step when a sample boundary cut it short.
                if !last || h >= self.dt {
                    self.dt = (h * factor).min(self.cfg.dt_max);
                }
            } else {
                self.diagnostics.rejected_steps += 1;
                let factor = (SAFETY * err.powf(-0.2)).clamp(MIN_SHRINK, 1.0);
                self.dt = h * factor;
                if self.dt < MIN_STEP {
                    return Err(Error::StepUnderflow { t: self.t, dt: self.dt });
                }
            }
        }
        Ok(())
    }

    /// One trial step of size `h`; fills `y_new` and `k[6]`, returns the
    /// scaled error norm.
    fn try_step(&mut self, h: f64, scratch: &mut Vec<C64>) -> f64 {
        let t = self.t;
        let len = self.y.len();
        let combos: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (stage_idx, (c, coeffs)) in combos.iter().enumerate() {
            for i in 0..len {
                let mut acc = C64::new(0.0, 0.0);
                for (j, a) in coeffs.iter().enumerate() {
                    acc += self.k[j][i] * *a;
                }
                self.stage[i] = self.y[i] + acc * h;
            }
            let mut out = std::mem::take(&mut self.k[stage_idx + 1]);
            self.rhs(t + c * h, &self.stage, &mut out, scratch);
            self.k[stage_idx + 1] = out;
        }
        for i in 0..len {
            let incr = self.k[0][i] * B1
                + self.k[2][i] * B3
                + self.k[3][i] * B4
                + self.k[4][i] * B5
                + self.k[5][i] * B6;
            self.y_new[i] = self.y[i] + incr * h;
        }
        let mut out = std::mem::take(&mut self.k[6]);
        self.rhs(t + h, &self.y_new, &mut out, scratch);
        self.k[6] = out;

        let mut worst = 0.0_f64;
        for i in 0..len {
            let e = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            let scale = self.cfg.abs_tol + self.cfg.rel_tol * self.y[i].norm().max(self.y_new[i].norm());
            worst = worst.max(e.norm() / scale);
        }
        if worst.is_finite() {
            worst
        } else {
            f64::INFINITY
        }
    }

    /// Lab-frame density matrix at the current time.
    pub(crate) fn lab_state(&self) -> DMatrix<C64> {
        let d = self.gen.dim;
        let u = self.phases(self.t);
        DMatrix::from_fn(d, d, |n, m| self.y[n + m * d] * u[n].conj() * u[m])
    }

    /// Rescales the carried state so its trace is one.
    fn renormalize(&mut self, trace: C64) {
        for v in &mut self.y {
            *v /= trace;
        }
        self.k1_valid = false;
    }

    /// Lab-frame sample at the current time with the per-sample checks.
    pub(crate) fn sample(&mut self) -> Result<DensityMatrix> {
        let mut m = self.lab_state();
        let trace = m.trace();
        if (trace - C64::new(1.0, 0.0)).norm() > TRACE_RENORM_THRESHOLD {
            debug!(
                "t = {:.6}: trace drift {:.3e}, renormalizing",
                self.t,
                (trace - 1.0).norm()
            );
            m /= trace;
            self.renormalize(trace);
            self.diagnostics.renormalized_samples += 1;
        }
        let rho = DensityMatrix::from_matrix_unchecked(m);
        let report = if self.cfg.check_positivity {
            rho.validate(&SAMPLE_TOLERANCE)
        } else {
            rho.structure_report(&SAMPLE_TOLERANCE)
        };
        let diag = &mut self.diagnostics;
        diag.max_trace_defect = diag.max_trace_defect.max(report.trace_defect);
        diag.max_hermiticity_defect = diag.max_hermiticity_defect.max(report.hermiticity_defect);
        if let Some(min) = report.min_eigenvalue {
            diag.min_eigenvalue = Some(diag.min_eigenvalue.map_or(min, |m| m.min(min)));
        }
        if !report.passed {
            return Err(Error::Integrity { t: self.t, report });
        }
        let d = rho.dim();
        let top = rho.matrix()[(d - 1, d - 1)].re + rho.matrix()[(d - 2, d - 2)].re;
        if top >= TRUNCATION_LIMIT && diag.truncation_ok() {
            warn!(
                "t = {:.6}: top two Fock levels hold {:.3e}; basis of {} levels is too small",
                self.t, top, d
            );
        }
        diag.max_top_population = diag.max_top_population.max(top);
        Ok(rho)
    }
}

/// Uniform sample grid `0, Δ, 2Δ, …` ending at `t_end`.
pub fn sample_grid(t_end: f64, sample_dt: f64) -> Vec<f64> {
    let steps = (t_end / sample_dt * (1.0 + 1e-12)).floor() as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * sample_dt).collect();
    let last = *times.last().unwrap_or(&0.0);
    if t_end - last > 1e-9 * sample_dt {
        times.push(t_end);
    } else if let Some(l) = times.last_mut() {
        *l = l.min(t_end);
    }
    times
}

/// Integrates from `t = 0` and stores ρ every `cfg.sample_dt` up to `t_end`.
pub fn integrate_master(
    rho0: &DensityMatrix,
    t_end: f64,
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be positive, got {t_end}"),
        });
    }
    cfg.validate()?;
    integrate_master_at(rho0, &sample_grid(t_end, cfg.sample_dt), p, cfg)
}

/// Integrates from `t = 0` and stores ρ at each of `times` (ascending, ≥ 0).
pub fn integrate_master_at(
    rho0: &DensityMatrix,
    times: &[f64],
    p: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter {
            name: "times",
            reason: "sample times must be finite, nonnegative and ascending".into(),
        });
    }
    let initial = rho0.validate(&DensityTolerance::default());
    if !initial.passed {
        return Err(Error::Integrity { t: 0.0, report: initial });
    }
    let mut stepper = Stepper::new(rho0, p, *cfg)?;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        stepper.advance_to(t)?;
        states.push(stepper.sample()?);
    }
    let diagnostics = stepper.diagnostics;
    debug!(
        "master equation: {} accepted / {} rejected steps",
        diagnostics.accepted_steps, diagnostics.rejected_steps
    );
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        diagnostics,
    })
}

/// Stopping rule for [`steady_state_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Interval between convergence checks.
    pub check_interval: f64,
    /// Max-norm change per interval that counts as converged.
    pub threshold: f64,
    /// Give up at this time.
    pub t_cap: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            check_interval: 1.0,
            threshold: 1e-8,
            t_cap: 50.0,
        }
    }
}

/// Steady state reached from the vacuum under continuous-wave drive.
pub fn steady_state(p: &ModelParams, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    steady_state_with(p, cfg, &SteadyStateOptions::default()).map(|(rho, _)| rho)
}

/// As [`steady_state`], also returning the run diagnostics.
pub fn steady_state_with(
    p: &ModelParams,
    cfg: &IntegratorConfig,
    opts: &SteadyStateOptions,
) -> Result<(DensityMatrix, RunDiagnostics)> {
    if !p.drive.is_continuous() {
        return Err(Error::InvalidParameter {
            name: "drive",
            reason: "steady state requires continuous-wave drive".into(),
        });
    }
    p.validate()?;
    let rho0 = DensityMatrix::fock(p.nmax, 0)?;
    let mut stepper = Stepper::new(&rho0, p, *cfg)?;
    let mut previous = stepper.sample()?;
    let mut defect = f64::INFINITY;
    while stepper.time() < opts.t_cap {
        let next = (stepper.time() + opts.check_interval).min(opts.t_cap);
        stepper.advance_to(next)?;
        let current = stepper.sample()?;
        defect = (current.matrix() - previous.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        previous = current;
        if defect < opts.threshold {
            debug!("steady state reached at t = {}", stepper.time());
            return Ok((previous, stepper.diagnostics));
        }
    }
    Err(Error::Convergence {
        t: stepper.time(),
        defect,
    })
}

/// Max-norm of `ρ − ρ†` for a raw matrix; exposed for diagnostics.
pub fn matrix_hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    hermiticity_defect(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{expectation, FockOperator};
    use crate::model::PulseTrain;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Dense matrix-product form of the generator, independent of the
    /// banded implementation.
    fn dense_rhs(rho: &DensityMatrix, t: f64, p: &ModelParams) -> DMatrix<C64> {
        let h = p.hamiltonian(t).unwrap().into_matrix();
        let r = rho.matrix();
        let i = C64::new(0.0, 1.0);
        let mut out = -(&h * r - r * &h) * i;
        let (l1, l2) = p.lindblads().unwrap();
        for l in [l1, l2] {
            let l = l.into_matrix();
            let ld = l.adjoint();
            let ldl = &ld * &l;
            out += &l * r * &ld - (&ldl * r + r * &ldl) * C64::new(0.5, 0.0);
        }
        out
    }

    fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
            .prop_map(|v| v.into_iter().map(|(r, i)| C64::new(r, i)).collect())
    }

    fn random_density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
        complex_vec(dim * dim).prop_filter_map("degenerate", move |v| {
            let b = DMatrix::from_vec(dim, dim, v);
            let m = &b * b.adjoint();
            let tr = m.trace();
            (tr.re > 1e-6).then(|| DensityMatrix::from_matrix(m / tr).unwrap())
        })
    }

    #[test]
    fn vacuum_is_stationary_without_drive() {
        let p = ModelParams::new(-3.0, 2.0, 0.0).with_nmax(5);
        let rhs = lindblad_rhs(&DensityMatrix::fock(5, 0).unwrap(), 0.3, &p).unwrap();
        assert_eq!(rhs.norm(), 0.0);
    }

    #[test]
    fn single_quantum_decays() {
        let p = ModelParams::new(1.0, 1.0, 0.0).with_nmax(4);
        let rhs = lindblad_rhs(&DensityMatrix::fock(4, 1).unwrap(), 0.0, &p).unwrap();
        assert_eq!(rhs[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(rhs[(1, 1)], C64::new(-1.0, 0.0));
        let rest: f64 = rhs.iter().map(|z| z.norm()).sum();
        assert_eq!(rest, 2.0);
    }

    #[test]
    fn rhs_dimension_mismatch() {
        let p = ModelParams::new(0.0, 0.0, 1.0).with_nmax(5);
        assert!(matches!(
            lindblad_rhs(&DensityMatrix::fock(4, 0).unwrap(), 0.0, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn rhs_is_traceless(rho in random_density(6), t in 0.0..10.0f64, nbath in 0.0..2.0f64) {
            let p = ModelParams::new(-11.0, 15.0, 7.0)
                .with_nmax(6)
                .with_nbath(nbath)
                .with_pulses(PulseTrain::new(0.7, 2.2, 4));
            let rhs = lindblad_rhs(&rho, t, &p).unwrap();
            prop_assert!(rhs.trace().norm() <= 1e-12);
        }

        #[test]
        fn banded_matches_dense_products(
            rho in random_density(7), t in 0.0..10.0f64, nbath in 0.0..2.0f64,
            re in -8.0..8.0f64, im in -8.0..8.0f64,
        ) {
            let p = ModelParams::new(-11.0, 15.0, 0.0)
                .with_omega(C64::new(re, im))
                .with_nmax(7)
                .with_nbath(nbath)
                .with_gamma(1.3)
                .with_pulses(PulseTrain::new(0.7, 2.2, 4));
            let fast = lindblad_rhs(&rho, t, &p).unwrap();
            let slow = dense_rhs(&rho, t, &p);
            prop_assert!((fast - slow).camax() <= 1e-11);
        }
    }

    #[test]
    fn undriven_decay_matches_exponential() {
        let p = ModelParams::new(-15.0, 15.0, 0.0).with_nmax(10);
        let rho0 = DensityMatrix::fock(10, 1).unwrap();
        let traj = integrate_master_at(&rho0, &[0.0, 1.0, 2.0, 5.0], &p, &IntegratorConfig::default())
            .unwrap();
        for (t, rho) in traj.times.iter().zip(&traj.states) {
            let p1 = rho.matrix()[(1, 1)].re;
            let exact = (-t).exp();
            assert!((p1 - exact).abs() <= 1e-6 * exact, "t = {t}: {p1} vs {exact}");
        }
    }

    /// `d⟨a⟩/dt = −(γ/2 + iΔ)⟨a⟩ − iΩ` when χ = 0, from the vacuum.
    fn harmonic_mean_amplitude(delta: f64, omega: f64, t: f64) -> C64 {
        let rate = C64::new(0.5, delta);
        let i = C64::new(0.0, 1.0);
        -i * omega / rate * (C64::new(1.0, 0.0) - (-rate * t).exp())
    }

    #[test]
    fn harmonic_limit_follows_linear_ode() {
        let (delta, omega) = (1.5, 1.0);
        let p = ModelParams::new(delta, 0.0, omega).with_nmax(20);
        let times = [0.5, 1.0, 3.0, 8.0];
        let traj = integrate_master_at(
            &DensityMatrix::fock(20, 0).unwrap(),
            &times,
            &p,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let a = FockOperator::annihilation(20).unwrap();
        for (t, rho) in times.iter().zip(&traj.states) {
            let got = expectation(&a, rho).unwrap();
            let want = harmonic_mean_amplitude(delta, omega, *t);
            assert!((got - want).norm() < 1e-7, "t = {t}: {got} vs {want}");
        }
    }

    #[test]
    fn pulsed_run_preserves_trace_and_hermiticity() {
        let p = ModelParams::new(-11.0, 15.0, 7.0)
            .with_nmax(20)
            .with_pulses(PulseTrain::new(0.7, 2.2, 4).with_t0(2.2));
        let traj = integrate_master(
            &DensityMatrix::fock(20, 0).unwrap(),
            8.0,
            &p,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.times.len(), 801);
        let d = traj.diagnostics;
        assert!(d.max_trace_defect <= 1e-8, "{d:?}");
        assert!(d.max_hermiticity_defect <= 1e-9, "{d:?}");
        assert!(d.min_eigenvalue.unwrap() >= -1e-8, "{d:?}");
        assert!(d.truncation_ok(), "{d:?}");
        assert!(traj.states.iter().any(|r| r.matrix()[(1, 1)].re > 0.3));
    }

    #[test]
    fn truncation_is_flagged_for_tiny_basis() {
        let p = ModelParams::new(0.0, 0.0, 2.0).with_nmax(3);
        let traj = integrate_master(
            &DensityMatrix::fock(3, 0).unwrap(),
            2.0,
            &p,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(!traj.diagnostics.truncation_ok());
    }

    #[test]
    fn steady_state_examples() {
        let cfg = IntegratorConfig::default();
        let vac = steady_state(&ModelParams::new(-2.0, 1.0, 0.0).with_nmax(6), &cfg).unwrap();
        assert_abs_diff_eq!(vac.matrix()[(0, 0)].re, 1.0, epsilon = 1e-12);

        let p = ModelParams::new(0.0, 0.0, 0.0).with_nmax(40).with_nbath(1.0);
        let thermal = steady_state(&p, &cfg).unwrap();
        let n = FockOperator::number(40).unwrap();
        assert_abs_diff_eq!(expectation(&n, &thermal).unwrap().re, 1.0, epsilon = 1e-6);
        for k in 1..10 {
            let ratio = thermal.matrix()[(k, k)].re / thermal.matrix()[(k - 1, k - 1)].re;
            assert_abs_diff_eq!(ratio, 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn steady_state_needs_continuous_drive() {
        let p = ModelParams::new(0.0, 0.0, 1.0).with_pulses(PulseTrain::new(0.4, 5.5, 2));
        assert!(matches!(
            steady_state(&p, &IntegratorConfig::default()),
            Err(Error::InvalidParameter { name: "drive", .. })
        ));
    }

    #[test]
    fn steady_state_reports_non_convergence() {
        let p = ModelParams::new(0.0, 0.0, 1.0).with_nmax(10);
        let opts = SteadyStateOptions {
            t_cap: 3.0,
            ..Default::default()
        };
        match steady_state_with(&p, &IntegratorConfig::default(), &opts) {
            Err(Error::Convergence { t, defect }) => {
                assert_eq!(t, 3.0);
                assert!(defect > 1e-8);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn impossible_tolerance_underflows() {
        let p = ModelParams::new(-11.0, 15.0, 7.0).with_nmax(6);
        let cfg = IntegratorConfig {
            rel_tol: 1e-300,
            abs_tol: 1e-300,
            ..Default::default()
        };
        let err = integrate_master(&DensityMatrix::fock(6, 0).unwrap(), 1.0, &p, &cfg).unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }), "{err:?}");
    }

    #[test]
    fn invalid_inputs() {
        let p = ModelParams::new(0.0, 0.0, 1.0).with_nmax(4);
        let rho = DensityMatrix::fock(4, 0).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(integrate_master(&rho, 0.0, &p, &cfg).is_err());
        let bad = IntegratorConfig {
            dt_max: 1e-4,
            ..cfg
        };
        assert!(integrate_master(&rho, 1.0, &p, &bad).is_err());
        let short = DensityMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let mut m = short.into_matrix();
        m[(0, 0)] = C64::new(0.5, 0.0);
        let invalid = DensityMatrix::from_matrix(m).unwrap();
        assert!(matches!(
            integrate_master(&invalid, 1.0, &p, &cfg),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn sample_grid_hits_end() {
        assert_eq!(sample_grid(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = sample_grid(1.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(sample_grid(22.5, 0.01).len(), 2251);
    }

    #[test]
    fn concurrent_runs_agree() {
        let p = ModelParams::new(-15.0, 15.0, 6.0)
            .with_nmax(12)
            .with_pulses(PulseTrain::new(0.4, 5.5, 2).with_t0(5.5));
        let rho0 = DensityMatrix::fock(12, 0).unwrap();
        let cfg = IntegratorConfig {
            sample_dt: 0.1,
            ..Default::default()
        };
        let handles: Vec<_> = (0..3)
            .map(|_| {
                let rho0 = rho0.clone();
                std::thread::spawn(move || integrate_master(&rho0, 7.0, &p, &cfg).unwrap())
            })
            .collect();
        let runs: Vec<Trajectory> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for run in &runs[1..] {
            assert_eq!(run.states, runs[0].states);
        }
        let p1 = runs[0].state_at(5.4).unwrap().matrix()[(1, 1)].re;
        assert!(p1 > 0.7, "P1 near the pulse peak = {p1}");
    }
}
