//! Physical model: driven Kerr oscillator with a Gaussian pulse-train drive.
//!
//! Units: ħ = 1, rates in units of the damping rate γ, times in γ⁻¹.
//!
//! ```text
//! H(t) = Δ a†a + χ (a†a)² + f(t) (Ω a† + Ω* a)
//! f(t) = Σ_{n=0}^{count−1} exp(−(t − t₀ − nτ)² / T²)
//! L₁ = √((N+1)γ) a,   L₂ = √(Nγ) a†
//! ```

use crate::error::{Error, Result};
use crate::hilbert::{FockOperator, C64};

/// Pulses further than this many widths from `t` contribute below 1e-43.
const ENVELOPE_CUTOFF_WIDTHS: f64 = 10.0;

/// Half-width, in pulse widths, of the window around each pulse centre in
/// which the integrators cap their step.
pub const PULSE_WINDOW_WIDTHS: f64 = 4.0;

/// A finite train of Gaussian pulses of width `T` spaced by `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrain {
    /// Centre of the first pulse.
    pub t0: f64,
    /// Spacing between pulse centres.
    pub tau: f64,
    /// Pulse duration `T`.
    pub width: f64,
    pub count: usize,
}

impl PulseTrain {
    /// Train whose first pulse is centred at `3·width`, so the drive rises
    /// smoothly from zero at t = 0.
    pub fn new(width: f64, tau: f64, count: usize) -> Self {
        Self {
            t0: 3.0 * width,
            tau,
            width,
            count,
        }
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: format!("pulse width must be positive, got {}", self.width),
            });
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter {
                name: "count",
                reason: "pulse count must be at least 1".into(),
            });
        }
        if self.count > 1 && (!(self.tau > 0.0) || !self.tau.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                reason: format!("pulse spacing must be positive, got {}", self.tau),
            });
        }
        if !self.t0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "t0",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    pub fn centre(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.tau
    }

    /// Indices of pulses whose centre lies within `reach` of `t`.
    fn pulses_near(&self, t: f64, reach: f64) -> std::ops::Range<usize> {
        if self.count == 1 || self.tau <= 0.0 {
            return 0..self.count;
        }
        let lo = ((t - reach - self.t0) / self.tau).ceil().max(0.0);
        let hi = ((t + reach - self.t0) / self.tau).floor() + 1.0;
        let hi = hi.clamp(0.0, self.count as f64);
        let lo = lo.min(hi);
        lo as usize..hi as usize
    }

    pub fn envelope(&self, t: f64) -> f64 {
        let reach = ENVELOPE_CUTOFF_WIDTHS * self.width;
        self.pulses_near(t, reach)
            .map(|n| {
                let x = (t - self.centre(n)) / self.width;
                (-x * x).exp()
            })
            .sum()
    }

    /// Whether `t` lies within [`PULSE_WINDOW_WIDTHS`] widths of a centre.
    pub fn in_window(&self, t: f64) -> bool {
        let reach = PULSE_WINDOW_WIDTHS * self.width;
        !self.pulses_near(t, reach).is_empty()
    }

    /// Start of the first pulse window opening strictly after `t`.
    pub fn next_window_start(&self, t: f64) -> Option<f64> {
        let reach = PULSE_WINDOW_WIDTHS * self.width;
        (0..self.count)
            .map(|n| self.centre(n) - reach)
            .find(|start| *start > t)
    }
}

/// Time dependence of the drive amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    /// `f(t) ≡ 1`.
    ContinuousWave,
    Pulses(PulseTrain),
}

impl Drive {
    pub fn envelope(&self, t: f64) -> f64 {
        match self {
            Drive::ContinuousWave => 1.0,
            Drive::Pulses(train) => train.envelope(t),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Drive::ContinuousWave)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Drive::ContinuousWave => Ok(()),
            Drive::Pulses(train) => train.validate(),
        }
    }
}

/// `f(t)` for the given drive.
pub fn pulse_envelope(t: f64, drive: &Drive) -> f64 {
    drive.envelope(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Detuning Δ = ω₀ − ω.
    pub delta: f64,
    /// Kerr strength χ.
    pub chi: f64,
    /// Drive amplitude Ω.
    pub omega: C64,
    /// Damping rate γ; 1 in the natural units of this crate.
    pub gamma: f64,
    /// Mean reservoir occupation N.
    pub nbath: f64,
    pub drive: Drive,
    /// Basis size: levels `|0⟩ … |nmax−1⟩`.
    pub nmax: usize,
}

pub const DEFAULT_NMAX: usize = 30;

impl ModelParams {
    /// Continuous-wave model at zero temperature with γ = 1.
    pub fn new(delta: f64, chi: f64, omega: f64) -> Self {
        Self {
            delta,
            chi,
            omega: C64::new(omega, 0.0),
            gamma: 1.0,
            nbath: 0.0,
            drive: Drive::ContinuousWave,
            nmax: DEFAULT_NMAX,
        }
    }

    pub fn with_drive(mut self, drive: Drive) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_pulses(self, train: PulseTrain) -> Self {
        self.with_drive(Drive::Pulses(train))
    }

    pub fn with_nmax(mut self, nmax: usize) -> Self {
        self.nmax = nmax;
        self
    }

    pub fn with_nbath(mut self, nbath: f64) -> Self {
        self.nbath = nbath;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_omega(mut self, omega: C64) -> Self {
        self.omega = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: "must be finite".into(),
                })
            }
        };
        finite("delta", self.delta)?;
        finite("chi", self.chi)?;
        finite("omega", self.omega.re)?;
        finite("omega", self.omega.im)?;
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be nonnegative, got {}", self.gamma),
            });
        }
        if !(self.nbath >= 0.0) || !self.nbath.is_finite() {
            return Err(Error::InvalidParameter {
                name: "nbath",
                reason: format!("must be nonnegative, got {}", self.nbath),
            });
        }
        if self.nmax < 2 {
            return Err(Error::InvalidDimension { dim: self.nmax });
        }
        self.drive.validate()
    }

    /// Diagonal of the undriven Hamiltonian, `Δn + χn²`.
    pub fn free_energies(&self) -> Vec<f64> {
        (0..self.nmax)
            .map(|n| {
                let n = n as f64;
                self.delta * n + self.chi * n * n
            })
            .collect()
    }

    pub fn hamiltonian(&self, t: f64) -> Result<FockOperator> {
        if self.nmax < 2 {
            return Err(Error::InvalidDimension { dim: self.nmax });
        }
        let free = FockOperator::diagonal(&self.free_energies());
        let a = FockOperator::annihilation(self.nmax)?;
        let f = self.drive.envelope(t);
        let drive = &a.adjoint().scale(self.omega * f) + &a.scale(self.omega.conj() * f);
        Ok(&free + &drive)
    }

    /// `(L₁, L₂)`; `L₂` is the zero operator when `N = 0`.
    pub fn lindblads(&self) -> Result<(FockOperator, FockOperator)> {
        let a = FockOperator::annihilation(self.nmax)?;
        let decay = a.scale(C64::new(((self.nbath + 1.0) * self.gamma).sqrt(), 0.0));
        let pump = if self.nbath > 0.0 {
            a.adjoint()
                .scale(C64::new((self.nbath * self.gamma).sqrt(), 0.0))
        } else {
            FockOperator::zeros(self.nmax)?
        };
        Ok((decay, pump))
    }

    /// Undriven level energy `ω₀n + χn²` with `E₀ = 0`.
    pub fn bare_energy(&self, n: usize, omega0: f64) -> f64 {
        let n = n as f64;
        omega0 * n + self.chi * n * n
    }

    /// Second-order drive shift of level `n` for drive frequency `omega`:
    /// `|Ω|² (n/(ω + χ(2n−1)) − (n+1)/(ω + χ(2n+1)))`.
    pub fn stark_shift(&self, n: usize, omega: f64) -> Result<f64> {
        let nf = n as f64;
        let omega_sq = self.omega.norm_sqr();
        let scale = omega.abs() + self.chi.abs() * (2.0 * nf + 1.0);
        let singular = |den: f64| den.abs() <= f64::EPSILON * scale || !den.is_finite();

        let lower = if n == 0 {
            0.0
        } else {
            let den = omega + self.chi * (2.0 * nf - 1.0);
            if singular(den) {
                return Err(Error::SingularParameter(format!(
                    "ω + χ(2n−1) vanishes for n = {n}"
                )));
            }
            nf / den
        };
        let den = omega + self.chi * (2.0 * nf + 1.0);
        if singular(den) {
            return Err(Error::SingularParameter(format!(
                "ω + χ(2n+1) vanishes for n = {n}"
            )));
        }
        Ok(omega_sq * (lower - (nf + 1.0) / den))
    }

    /// Offset of the drive from the `|0⟩→|1⟩` transition, `δ = Δ + χ`.
    pub fn resonance_offset(&self) -> f64 {
        self.delta + self.chi
    }

    /// `R = √(|Ω|² + δ²)`.
    pub fn rabi_frequency(&self) -> f64 {
        (self.omega.norm_sqr() + self.resonance_offset().powi(2)).sqrt()
    }

    pub fn regime_report(&self) -> RegimeReport {
        let offset = self.resonance_offset();
        let omega = self.omega.norm();
        RegimeReport {
            monostable: self.chi * offset >= 0.0,
            low_excitation: omega == 0.0 || (self.delta / omega).abs() > 1.0,
            resonance_offset: offset,
            quantum_ratio: self.chi / self.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    /// `χ(Δ+χ) ≥ 0`: no semiclassical bistability.
    pub monostable: bool,
    /// `|Δ/Ω| > 1`.
    pub low_excitation: bool,
    pub resonance_offset: f64,
    /// `χ/γ`.
    pub quantum_ratio: f64,
}
