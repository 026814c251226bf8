//! Observables and phase-space pictures of a density matrix.
//!
//! Wigner functions use `α = x + iy` and the normalization
//! `∫ W dx dy = 1`, so the vacuum is `(2/π) e^{−2|α|²}`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, PureState, C64};
use crate::model::ModelParams;
use crate::special::{laguerre_sequence, log_factorials, reduced_bessel_j};

/// Largest tolerated imaginary part of a Wigner function before the
/// evaluation is rejected.
pub const WIGNER_IMAG_LIMIT: f64 = 1e-8;

/// `P_n = ⟨n|ρ|n⟩`.
pub fn populations(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|n| rho.matrix()[(n, n)].re).collect()
}

/// `Tr(a†a ρ)`.
pub fn mean_excitation(rho: &DensityMatrix) -> f64 {
    populations(rho)
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

/// `F = |⟨Ψ|ρ|Ψ⟩|` for a pure target.
pub fn fidelity(rho: &DensityMatrix, target: &PureState) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: target.dim(),
        });
    }
    let psi = target.amplitudes();
    let overlap = psi.dotc(&(rho.matrix() * psi));
    Ok(overlap.norm())
}

/// Square sampling grid `[−extent, extent]²` with `points` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub extent: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            extent: 4.0,
            points: 201,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(Error::InvalidParameter {
                name: "extent",
                reason: format!("must be positive, got {}", self.extent),
            });
        }
        if self.points < 2 {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: "need at least 2 points per axis".into(),
            });
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = 2.0 * self.extent / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| -self.extent + i as f64 * step)
            .collect()
    }
}

/// `W(xᵢ, yⱼ)` on a rectangular grid, stored x-major (`values[i·ny + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoidal `∫ W dx dy`.
    pub norm_integral: f64,
}

impl WignerGrid {
    fn from_values(xs: Vec<f64>, ys: Vec<f64>, values: Vec<f64>) -> Self {
        let mut grid = Self {
            xs,
            ys,
            values,
            norm_integral: 0.0,
        };
        grid.norm_integral = grid.integrate(|w| w);
        grid
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ys.len() + j]
    }

    /// Trapezoidal integral of `f(W)` over the grid.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let wx = trapezoid_weights(&self.xs);
        let wy = trapezoid_weights(&self.ys);
        let ny = self.ys.len();
        // fixed summation order: rows in x, then y
        wx.iter()
            .enumerate()
            .map(|(i, wxi)| {
                wy.iter()
                    .enumerate()
                    .map(|(j, wyj)| wyj * f(self.values[i * ny + j]))
                    .sum::<f64>()
                    * wxi
            })
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn peak_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Copy rescaled to unit integral.
    pub fn normalized(&self) -> Self {
        let scale = 1.0 / self.norm_integral;
        Self {
            xs: self.xs.clone(),
            ys: self.ys.clone(),
            values: self.values.iter().map(|v| v * scale).collect(),
            norm_integral: 1.0,
        }
    }

    /// `max |W − W'|` for grids on the same nodes.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.xs != other.xs || self.ys != other.ys {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Value at the node nearest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> f64 {
        let idx = |axis: &[f64], v: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        self.value(idx(&self.xs, x), idx(&self.ys, y))
    }
}

fn trapezoid_weights(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Fock-basis Wigner kernel `W_{mn}(α)`:
///
/// ```text
/// W_{mn}(α) = (2/π) (−1)ⁿ √(n!/m!) (2α)^{m−n} e^{−2|α|²} L_n^{m−n}(4|α|²),  m ≥ n
/// W_{nm}(α) = conj(W_{mn}(α))
/// ```
///
/// so that `W(α) = Σ_{n,m} ρ_{nm} W_{mn}(α)` and a coherent state `|β⟩`
/// peaks at `α = β`.
pub fn wigner_kernel(m: usize, n: usize, alpha: C64) -> C64 {
    if m < n {
        return wigner_kernel(n, m, alpha).conj();
    }
    let k = m - n;
    let r2 = alpha.norm_sqr();
    if k > 0 && r2 == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let lf = log_factorials(m + 1);
    let mut lag = Vec::with_capacity(n + 1);
    laguerre_sequence(k, 4.0 * r2, n + 1, &mut lag);
    let log_mag = 0.5 * (lf[n] - lf[m]) + if k > 0 { k as f64 * (2.0 * r2.sqrt()).ln() } else { 0.0 }
        - 2.0 * r2;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let phase = C64::from_polar(1.0, k as f64 * alpha.arg());
    phase * (2.0 / PI * sign * log_mag.exp() * lag[n])
}

/// `W(α) = Σ ρ_nm W_mn(α)` at one point, before discarding the imaginary part.
fn wigner_point(rho: &DensityMatrix, lf: &[f64], alpha: C64, lag: &mut Vec<f64>) -> C64 {
    let d = rho.dim();
    let m = rho.matrix();
    let r2 = alpha.norm_sqr();
    let x = 4.0 * r2;
    let log_two_r = (2.0 * r2.sqrt()).ln();
    let unit = if r2 > 0.0 {
        C64::from_polar(1.0, alpha.arg())
    } else {
        C64::new(1.0, 0.0)
    };
    let mut total = C64::new(0.0, 0.0);
    let mut phase = C64::new(1.0, 0.0);
    for k in 0..d {
        if k > 0 {
            if r2 == 0.0 {
                break;
            }
            phase *= unit;
        }
        let count = d - k;
        laguerre_sequence(k, x, count, lag);
        let mut inner = C64::new(0.0, 0.0);
        for n in 0..count {
            let log_mag = 0.5 * (lf[n] - lf[n + k])
                + if k > 0 { k as f64 * log_two_r } else { 0.0 }
                - 2.0 * r2;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let kernel = phase * (sign * log_mag.exp() * lag[n]);
            inner += m[(n, n + k)] * kernel;
            if k > 0 {
                inner += m[(n + k, n)] * kernel.conj();
            }
        }
        total += inner;
    }
    total * (2.0 / PI)
}

/// Wigner function of `rho` on the grid.
///
/// Fails when the imaginary residue exceeds [`WIGNER_IMAG_LIMIT`], which
/// means `rho` was not Hermitian.
pub fn wigner_numeric(rho: &DensityMatrix, grid: &GridSpec) -> Result<WignerGrid> {
    grid.validate()?;
    let axis = grid.axis();
    let lf = log_factorials(rho.dim() + 1);
    let ny = axis.len();
    let rows: Vec<(Vec<f64>, f64)> = axis
        .par_iter()
        .map(|&x| {
            let mut lag = Vec::with_capacity(rho.dim());
            let mut residue = 0.0_f64;
            let row = axis
                .iter()
                .map(|&y| {
                    let w = wigner_point(rho, &lf, C64::new(x, y), &mut lag);
                    residue = residue.max(w.im.abs());
                    w.re
                })
                .collect();
            (row, residue)
        })
        .collect();
    let residue = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if residue > WIGNER_IMAG_LIMIT {
        return Err(Error::ImaginaryResidue { residue });
    }
    let mut values = Vec::with_capacity(ny * ny);
    for (row, _) in rows {
        values.extend(row);
    }
    Ok(WignerGrid::from_values(axis.clone(), axis, values))
}

/// Parameters of the closed-form continuous-wave steady-state Wigner
/// function,
///
/// ```text
/// W(α) = N e^{−2|α|²} |J_{λ−1}(√(8ε̄α)) / (8ε̄α)^{(λ−1)/2}|²
/// λ = 1 + (Δ + iγ/2)/χ,   ε = Ω/χ
/// ```
///
/// valid at zero bath temperature. The same branch is used for the root in
/// the argument and the power in the denominator, so the quotient is the
/// entire function [`reduced_bessel_j`] of `w = 8ε̄α` and carries no
/// branch cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyWignerParams {
    pub lambda: C64,
    pub epsilon: C64,
}

impl SteadyWignerParams {
    pub fn from_model(p: &ModelParams) -> Result<Self> {
        if p.chi == 0.0 {
            return Err(Error::UndefinedParameter("chi"));
        }
        Ok(Self {
            lambda: C64::new(1.0, 0.0) + C64::new(p.delta, 0.5 * p.gamma) / p.chi,
            epsilon: p.omega / p.chi,
        })
    }

    /// Bessel order `λ − 1`.
    pub fn order(&self) -> C64 {
        self.lambda - 1.0
    }

    /// Argument `w = 8ε̄α` of the reduced Bessel function.
    pub fn argument(&self, alpha: C64) -> C64 {
        8.0 * self.epsilon.conj() * alpha
    }

    /// Unnormalized `e^{−2|α|²} |J_{λ−1}(√w)/w^{(λ−1)/2}|²`.
    pub fn density(&self, alpha: C64) -> Result<f64> {
        let reduced = reduced_bessel_j(self.order(), self.argument(alpha))?;
        Ok((-2.0 * alpha.norm_sqr()).exp() * reduced.norm_sqr())
    }
}

/// Closed-form steady-state Wigner function, normalized on the grid to
/// unit trapezoidal integral.
pub fn wigner_analytic_steady(p: &ModelParams, grid: &GridSpec) -> Result<WignerGrid> {
    if !p.drive.is_continuous() {
        return Err(Error::InvalidParameter {
            name: "drive",
            reason: "the closed form holds for continuous-wave drive only".into(),
        });
    }
    let params = SteadyWignerParams::from_model(p)?;
    grid.validate()?;
    let axis = grid.axis();
    let rows: Result<Vec<Vec<f64>>> = axis
        .par_iter()
        .map(|&x| {
            axis.iter()
                .map(|&y| params.density(C64::new(x, y)))
                .collect()
        })
        .collect();
    let values: Vec<f64> = rows?.into_iter().flatten().collect();
    let raw = WignerGrid::from_values(axis.clone(), axis, values);
    Ok(raw.normalized())
}

/// `∫|W| − ∫W`, twice the integrated negative part.
pub fn negativity_volume(grid: &WignerGrid) -> f64 {
    let abs = grid.integrate(f64::abs);
    (abs - grid.norm_integral).max(0.0)
}
