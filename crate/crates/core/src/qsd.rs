//! Quantum state diffusion: stochastic pure-state trajectories whose
//! ensemble average reproduces the master equation.
//!
//! Each step applies the Itô increment
//!
//! ```text
//! |dψ⟩ = −iH|ψ⟩dt + Σᵢ (⟨Lᵢ†⟩Lᵢ − ½Lᵢ†Lᵢ − ½⟨Lᵢ†⟩⟨Lᵢ⟩)|ψ⟩dt + Σᵢ (Lᵢ − ⟨Lᵢ⟩)|ψ⟩dξᵢ
//! ```
//!
//! with `E[dξᵢ dξⱼ*] = δᵢⱼ dt` and `E[dξᵢ dξⱼ] = 0`, then renormalizes. The
//! diagonal part `Δn + χn²` of `H` is propagated exactly, half a step on
//! each side of the Euler–Maruyama increment; only the drive and the
//! reservoir terms are stepped explicitly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::evolve::sample_grid;
use crate::hilbert::{DensityMatrix, DensityTolerance, PureState, C64};
use crate::model::ModelParams;

/// Norm below which a step is rejected as collapsed.
pub const NORM_COLLAPSE: f64 = 1e-6;

/// Tolerances appropriate for a Monte-Carlo mean density matrix.
pub const ENSEMBLE_TOLERANCE: DensityTolerance = DensityTolerance {
    hermiticity: 1e-10,
    trace: 1e-6,
    positivity: 1e-6,
};

/// Trajectories per sequential leaf of the ensemble reduction. Leaves are
/// fixed index ranges, so the summation order never depends on the thread
/// schedule.
const LEAF_TRAJECTORIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QsdConfig {
    /// Fixed stochastic step.
    pub dt: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub sample_dt: f64,
}

impl Default for QsdConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_traj: 1000,
            seed: 0,
            sample_dt: 0.05,
        }
    }
}

impl QsdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if self.n_traj == 0 {
            return Err(Error::InvalidParameter {
                name: "n_traj",
                reason: "need at least one trajectory".into(),
            });
        }
        if !(self.sample_dt > 0.0) || !self.sample_dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sample_dt",
                reason: format!("must be positive, got {}", self.sample_dt),
            });
        }
        Ok(())
    }
}

/// One sampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct QsdPath {
    pub times: Vec<f64>,
    pub states: Vec<PureState>,
}

/// Ensemble mean of `|ψₖ⟩⟨ψₖ|` at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_rho: Vec<DensityMatrix>,
    /// `stderr_pop[sample][n]`, the standard error of `P_n` over trajectories.
    pub stderr_pop: Vec<Vec<f64>>,
    pub n_traj: usize,
}

impl EnsembleResult {
    pub fn population_series(&self, n: usize) -> Vec<f64> {
        self.mean_rho.iter().map(|r| r.matrix()[(n, n)].re).collect()
    }

    pub fn stderr_series(&self, n: usize) -> Vec<f64> {
        self.stderr_pop.iter().map(|s| s[n]).collect()
    }
}

/// Precomputed ladder data for stepping one model.
struct Stepper {
    dim: usize,
    sqrt: Vec<f64>,
    /// `e^{−iE_n dt/2}`.
    half_phase: Vec<C64>,
    /// Half-step phases for a shorter final step, cached by length.
    short: Option<(f64, Vec<C64>)>,
    energies: Vec<f64>,
    p: ModelParams,
    decay: f64,
    pump: f64,
    scratch: Vec<C64>,
}

impl Stepper {
    fn new(p: &ModelParams, dt: f64) -> Result<Self> {
        p.validate()?;
        let energies = p.free_energies();
        Ok(Self {
            dim: p.nmax,
            sqrt: (0..=p.nmax).map(|n| (n as f64).sqrt()).collect(),
            half_phase: phases(&energies, dt),
            short: None,
            energies,
            p: *p,
            decay: (p.nbath + 1.0) * p.gamma,
            pump: p.nbath * p.gamma,
            scratch: vec![C64::new(0.0, 0.0); p.nmax],
        })
    }

    fn channels(&self) -> usize {
        if self.pump > 0.0 {
            2
        } else {
            1
        }
    }

    /// Advances `psi` in place by `dt` from `t`; `noise` holds one increment
    /// per channel.
    fn step(&mut self, psi: &mut [C64], t: f64, dt: f64, noise: &[C64], full: bool) -> Result<()> {
        let d = self.dim;
        let s = &self.sqrt;
        let half = if full {
            &self.half_phase
        } else {
            if !matches!(self.short, Some((h, _)) if h == dt) {
                self.short = Some((dt, phases(&self.energies, dt)));
            }
            &self.short.as_ref().unwrap().1
        };
        for (z, ph) in psi.iter_mut().zip(half) {
            *z *= ph;
        }

        let a = (1..d).map(|n| psi[n - 1].conj() * s[n] * psi[n]).sum::<C64>();
        let drive = self.p.omega * self.p.drive.envelope(t + 0.5 * dt);
        let drive_c = drive.conj();
        let minus_i = C64::new(0.0, -1.0);
        let aad = |n: usize| if n + 1 < d { (n + 1) as f64 } else { 0.0 };

        // L₁ = √κ₁ a with ⟨L₁⟩ = √κ₁⟨a⟩; L₂ = √κ₂ a† with ⟨L₂⟩ = √κ₂⟨a⟩*.
        let xi1 = noise[0];
        let xi2 = if noise.len() > 1 { noise[1] } else { C64::new(0.0, 0.0) };
        let (k1, k2) = (self.decay, self.pump);
        let ac = a.conj();
        let out = &mut self.scratch;
        for n in 0..d {
            let lower = if n + 1 < d { s[n + 1] * psi[n + 1] } else { C64::new(0.0, 0.0) };
            let raise = if n > 0 { s[n] * psi[n - 1] } else { C64::new(0.0, 0.0) };
            let z = psi[n];
            let h = drive * raise + drive_c * lower;
            let mut incr = minus_i * h * dt;
            // channel 1
            incr += (k1 * ac * lower - 0.5 * k1 * n as f64 * z - 0.5 * k1 * a.norm_sqr() * z) * dt;
            incr += k1.sqrt() * (lower - a * z) * xi1;
            if k2 > 0.0 {
                incr += (k2 * a * raise - 0.5 * k2 * aad(n) * z - 0.5 * k2 * a.norm_sqr() * z) * dt;
                incr += k2.sqrt() * (raise - ac * z) * xi2;
            }
            out[n] = z + incr;
        }
        let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm >= NORM_COLLAPSE) {
            return Err(Error::NormCollapse { t, norm });
        }
        let inv = 1.0 / norm;
        for ((z, o), ph) in psi.iter_mut().zip(out.iter()).zip(half) {
            *z = o * ph * inv;
        }
        Ok(())
    }
}

fn phases(energies: &[f64], dt: f64) -> Vec<C64> {
    energies
        .iter()
        .map(|e| C64::from_polar(1.0, -e * 0.5 * dt))
        .collect()
}

/// One QSD step of length `dt` from time `t`.
///
/// `noise` holds one complex increment per Lindblad channel (two when the
/// bath is thermal, one otherwise).
pub fn qsd_step(psi: &PureState, t: f64, dt: f64, noise: &[C64], p: &ModelParams) -> Result<PureState> {
    if psi.dim() != p.nmax {
        return Err(Error::DimensionMismatch {
            expected: p.nmax,
            found: psi.dim(),
        });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let mut stepper = Stepper::new(p, dt)?;
    if noise.len() != stepper.channels() {
        return Err(Error::DimensionMismatch {
            expected: stepper.channels(),
            found: noise.len(),
        });
    }
    let mut amps: Vec<C64> = psi.amplitudes().iter().copied().collect();
    stepper.step(&mut amps, t, dt, noise, true)?;
    Ok(PureState::from_normalized(DVector::from_vec(amps)))
}

/// RNG stream of trajectory `index` under `seed`.
fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs one trajectory and hands every sample to `visit`.
fn drive_trajectory(
    psi0: &PureState,
    times: &[f64],
    p: &ModelParams,
    cfg: &QsdConfig,
    index: usize,
    mut visit: impl FnMut(usize, &[C64]),
) -> Result<()> {
    let dt = cfg.dt;
    let mut stepper = Stepper::new(p, dt)?;
    let channels = stepper.channels();
    let mut rng = trajectory_rng(cfg.seed, index);
    let scale = (0.5 * dt).sqrt();
    let mut amps: Vec<C64> = psi0.amplitudes().iter().copied().collect();
    let mut noise = [C64::new(0.0, 0.0); 2];
    let mut t = 0.0;
    for (k, &target) in times.iter().enumerate() {
        // whole steps counted from the segment start, then one short step
        let start = t;
        let whole = ((target - start) / dt * (1.0 + 1e-12)).floor() as usize;
        for j in 0..whole {
            let now = start + j as f64 * dt;
            for xi in noise.iter_mut().take(channels) {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                *xi = C64::new(g1, g2) * scale;
            }
            stepper.step(&mut amps, now, dt, &noise[..channels], true)?;
        }
        t = start + whole as f64 * dt;
        let rest = target - t;
        if rest > 1e-9 * dt {
            let short_scale = (0.5 * rest).sqrt();
            for xi in noise.iter_mut().take(channels) {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                *xi = C64::new(g1, g2) * short_scale;
            }
            stepper.step(&mut amps, t, rest, &noise[..channels], false)?;
        }
        t = target;
        visit(k, &amps);
    }
    Ok(())
}

fn check_inputs(psi0: &PureState, t_end: f64, p: &ModelParams, cfg: &QsdConfig) -> Result<()> {
    cfg.validate()?;
    p.validate()?;
    if psi0.dim() != p.nmax {
        return Err(Error::DimensionMismatch {
            expected: p.nmax,
            found: psi0.dim(),
        });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be positive, got {t_end}"),
        });
    }
    Ok(())
}

/// Samples trajectory `traj_index` every `cfg.sample_dt` up to `t_end`.
/// The path depends only on the inputs, so repeated calls are identical.
pub fn run_trajectory(
    psi0: &PureState,
    t_end: f64,
    p: &ModelParams,
    cfg: &QsdConfig,
    traj_index: usize,
) -> Result<QsdPath> {
    check_inputs(psi0, t_end, p, cfg)?;
    if traj_index >= cfg.n_traj {
        return Err(Error::InvalidParameter {
            name: "traj_index",
            reason: format!("{traj_index} is not below n_traj = {}", cfg.n_traj),
        });
    }
    let times = sample_grid(t_end, cfg.sample_dt);
    let mut states = Vec::with_capacity(times.len());
    drive_trajectory(psi0, &times, p, cfg, traj_index, |_, amps| {
        states.push(PureState::from_normalized(DVector::from_column_slice(amps)));
    })?;
    Ok(QsdPath { times, states })
}

/// Running sums over a block of trajectories.
struct Accumulator {
    rho: Vec<DMatrix<C64>>,
    pop: Vec<Vec<f64>>,
    pop_sq: Vec<Vec<f64>>,
}

impl Accumulator {
    fn zeros(samples: usize, dim: usize) -> Self {
        Self {
            rho: vec![DMatrix::zeros(dim, dim); samples],
            pop: vec![vec![0.0; dim]; samples],
            pop_sq: vec![vec![0.0; dim]; samples],
        }
    }

    fn add_state(&mut self, k: usize, psi: &[C64]) {
        let d = psi.len();
        let rho = &mut self.rho[k];
        for m in 0..d {
            let cm = psi[m].conj();
            for n in 0..d {
                rho[(n, m)] += psi[n] * cm;
            }
        }
        for (n, z) in psi.iter().enumerate() {
            let pn = z.norm_sqr();
            self.pop[k][n] += pn;
            self.pop_sq[k][n] += pn * pn;
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.rho.iter_mut().zip(other.rho) {
            *a += b;
        }
        for (a, b) in self.pop.iter_mut().zip(other.pop) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.pop_sq.iter_mut().zip(other.pop_sq) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self
    }
}

/// Trajectories `lo..hi`, reduced pairwise over a fixed binary split.
fn reduce_range(
    lo: usize,
    hi: usize,
    psi0: &PureState,
    times: &[f64],
    p: &ModelParams,
    cfg: &QsdConfig,
) -> Result<Accumulator> {
    if hi - lo <= LEAF_TRAJECTORIES {
        let mut acc = Accumulator::zeros(times.len(), p.nmax);
        for index in lo..hi {
            drive_trajectory(psi0, times, p, cfg, index, |k, amps| acc.add_state(k, amps))?;
        }
        return Ok(acc);
    }
    let mid = lo + (hi - lo) / 2;
    let (left, right) = rayon::join(
        || reduce_range(lo, mid, psi0, times, p, cfg),
        || reduce_range(mid, hi, psi0, times, p, cfg),
    );
    Ok(left?.merge(right?))
}

/// Averages `cfg.n_traj` trajectories in parallel. The result is
/// bit-reproducible for fixed `(seed, n_traj, dt)` on any thread count.
pub fn average_ensemble(
    psi0: &PureState,
    t_end: f64,
    p: &ModelParams,
    cfg: &QsdConfig,
) -> Result<EnsembleResult> {
    check_inputs(psi0, t_end, p, cfg)?;
    let times = sample_grid(t_end, cfg.sample_dt);
    let acc = reduce_range(0, cfg.n_traj, psi0, &times, p, cfg)?;
    let m = cfg.n_traj as f64;
    let mean_rho = acc
        .rho
        .into_iter()
        .map(|sum| DensityMatrix::from_matrix_unchecked(sum / C64::new(m, 0.0)))
        .collect();
    let stderr_pop = acc
        .pop
        .iter()
        .zip(&acc.pop_sq)
        .map(|(s1, s2)| {
            s1.iter()
                .zip(s2)
                .map(|(a, b)| {
                    if cfg.n_traj < 2 {
                        return 0.0;
                    }
                    let mean = a / m;
                    let var = ((b / m - mean * mean) * m / (m - 1.0)).max(0.0);
                    (var / m).sqrt()
                })
                .collect()
        })
        .collect();
    Ok(EnsembleResult {
        times,
        mean_rho,
        stderr_pop,
        n_traj: cfg.n_traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{integrate_master, IntegratorConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_is_stationary_without_drive() {
        let p = ModelParams::new(-3.0, 2.0, 0.0).with_nmax(6);
        let psi = PureState::fock(6, 0).unwrap();
        let next = qsd_step(&psi, 0.0, 1e-3, &[c(0.03, -0.01)], &p).unwrap();
        for n in 0..6 {
            let want = if n == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(next.amplitudes()[n].norm(), want, epsilon = 1e-15);
        }
    }

    #[test]
    fn unitary_limit_is_a_phase() {
        let p = ModelParams::new(1.0, 0.0, 0.0).with_nmax(4).with_gamma(0.0);
        let psi = PureState::fock(4, 1).unwrap();
        let dt = 1e-3;
        let next = qsd_step(&psi, 0.0, dt, &[c(0.5, 0.5)], &p).unwrap();
        let z = next.amplitudes()[1];
        assert_abs_diff_eq!((z - C64::from_polar(1.0, -dt)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let p = ModelParams::new(0.0, 1.0, 1.0).with_nmax(5);
        let psi = PureState::fock(5, 0).unwrap();
        assert!(qsd_step(&PureState::fock(4, 0).unwrap(), 0.0, 1e-3, &[c(0.0, 0.0)], &p).is_err());
        assert!(qsd_step(&psi, 0.0, 0.0, &[c(0.0, 0.0)], &p).is_err());
        assert!(qsd_step(&psi, 0.0, 1e-3, &[], &p).is_err());
        let thermal = p.with_nbath(0.5);
        assert!(qsd_step(&psi, 0.0, 1e-3, &[c(0.0, 0.0)], &thermal).is_err());
        assert!(qsd_step(&psi, 0.0, 1e-3, &[c(0.0, 0.0), c(0.0, 0.0)], &thermal).is_ok());
    }

    #[test]
    fn huge_noise_collapses_the_norm() {
        // |1⟩ with ⟨a⟩ = 0: the diffusion term maps |1⟩ to ξ|0⟩, and the
        // drift term shrinks |1⟩ by (1 − dt/2). A huge dt drives it to 0.
        let p = ModelParams::new(0.0, 0.0, 0.0).with_nmax(3);
        let psi = PureState::fock(3, 1).unwrap();
        let r = qsd_step(&psi, 0.0, 2.0, &[c(0.0, 0.0)], &p);
        assert!(matches!(r, Err(Error::NormCollapse { .. })), "{r:?}");
    }

    #[test]
    fn deterministic_limit_matches_schrodinger() {
        // γ = 0 and a resonant drive on the two lowest levels; compare with
        // the master equation, which then is the von Neumann equation.
        let p = ModelParams::new(-4.0, 4.0, 0.8).with_nmax(6).with_gamma(0.0);
        let cfg = QsdConfig {
            dt: 1e-3,
            n_traj: 1,
            seed: 3,
            sample_dt: 0.1,
        };
        let path = run_trajectory(&PureState::fock(6, 0).unwrap(), 2.0, &p, &cfg, 0).unwrap();
        let me = integrate_master(
            &DensityMatrix::fock(6, 0).unwrap(),
            2.0,
            &p,
            &IntegratorConfig {
                sample_dt: 0.1,
                ..Default::default()
            },
        )
        .unwrap();
        for (psi, rho) in path.states.iter().zip(&me.states) {
            for n in 0..3 {
                let diff = psi.amplitudes()[n].norm_sqr() - rho.matrix()[(n, n)].re;
                assert!(diff.abs() < 5e-3, "{diff}");
            }
        }
    }

    #[test]
    fn trajectories_are_reproducible_and_distinct() {
        let p = ModelParams::new(-11.0, 15.0, 7.0).with_nmax(8);
        let cfg = QsdConfig {
            dt: 1e-3,
            n_traj: 2,
            seed: 42,
            sample_dt: 0.05,
        };
        let psi0 = PureState::fock(8, 0).unwrap();
        let a = run_trajectory(&psi0, 0.5, &p, &cfg, 0).unwrap();
        let b = run_trajectory(&psi0, 0.5, &p, &cfg, 0).unwrap();
        let other = run_trajectory(&psi0, 0.5, &p, &cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
        assert_eq!(a.times.len(), 11);
        for psi in &a.states {
            assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-12);
        }
        assert!(run_trajectory(&psi0, 0.5, &p, &cfg, 2).is_err());
    }

    #[test]
    fn single_vacuum_trajectory_stays_vacuum() {
        let p = ModelParams::new(-2.0, 1.0, 0.0).with_nmax(5);
        let cfg = QsdConfig {
            dt: 1e-3,
            n_traj: 1,
            seed: 1,
            sample_dt: 0.25,
        };
        let res = average_ensemble(&PureState::fock(5, 0).unwrap(), 1.0, &p, &cfg).unwrap();
        let vac = DensityMatrix::fock(5, 0).unwrap();
        for rho in &res.mean_rho {
            assert_eq!(rho.matrix(), vac.matrix());
        }
        assert!(res.stderr_pop.iter().flatten().all(|s| *s == 0.0));
    }

    fn decay_ensemble(n_traj: usize, seed: u64) -> EnsembleResult {
        let p = ModelParams::new(0.0, 0.0, 0.0).with_nmax(4);
        let cfg = QsdConfig {
            dt: 1e-3,
            n_traj,
            seed,
            sample_dt: 0.1,
        };
        average_ensemble(&PureState::fock(4, 1).unwrap(), 3.0, &p, &cfg).unwrap()
    }

    #[test]
    fn ensemble_reproduces_decay_law() {
        let res = decay_ensemble(400, 7);
        for (k, t) in res.times.iter().enumerate() {
            let p1 = res.mean_rho[k].matrix()[(1, 1)].re;
            let se = res.stderr_pop[k][1];
            // O(dt) weak error on top of the statistical one
            assert!((p1 - (-t).exp()).abs() <= 3.0 * se + 1e-3, "t = {t}: {p1} ± {se}");
            assert!(res.mean_rho[k].validate(&ENSEMBLE_TOLERANCE).passed);
        }
    }

    #[test]
    fn stderr_scales_as_inverse_root_of_ensemble() {
        // Late in the decay trajectories localize and a handful of survivors
        // dominate the variance, so compare while P₁ is still large.
        let small = decay_ensemble(100, 11);
        let large = decay_ensemble(400, 12);
        let ratios: Vec<f64> = (1..small.times.len())
            .filter(|&k| small.times[k] <= 1.0 + 1e-9)
            .map(|k| small.stderr_pop[k][1] / large.stderr_pop[k][1])
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 2.0).abs() <= 0.4, "mean ratio {mean}");
    }

    #[test]
    fn ensemble_is_independent_of_thread_count() {
        let p = ModelParams::new(-11.0, 15.0, 7.0).with_nmax(8).with_nbath(0.2);
        let cfg = QsdConfig {
            dt: 2e-3,
            n_traj: 37,
            seed: 5,
            sample_dt: 0.1,
        };
        let psi0 = PureState::fock(8, 0).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| average_ensemble(&psi0, 0.6, &p, &cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(4));
    }

    #[test]
    fn config_validation() {
        assert!(QsdConfig::default().validate().is_ok());
        for bad in [
            QsdConfig { dt: 0.0, ..Default::default() },
            QsdConfig { n_traj: 0, ..Default::default() },
            QsdConfig { sample_dt: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn steps_keep_unit_norm(
            re in prop::collection::vec(-1.0..1.0f64, 6),
            im in prop::collection::vec(-1.0..1.0f64, 6),
            x in -0.1..0.1f64, y in -0.1..0.1f64, t in 0.0..10.0f64,
        ) {
            let amps: Vec<C64> = re.iter().zip(&im).map(|(a, b)| c(*a, *b)).collect();
            prop_assume!(amps.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-2);
            let psi = PureState::new(amps).unwrap();
            let p = ModelParams::new(-11.0, 15.0, 7.0).with_nmax(6);
            let next = qsd_step(&psi, t, 1e-3, &[c(x, y) * 0.03], &p).unwrap();
            prop_assert!((next.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
