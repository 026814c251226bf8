//! Truncated Fock-space linear algebra.
//!
//! Basis index `n` is the Fock state `|n⟩`; a basis of size `dim` holds
//! `|0⟩ … |dim−1⟩`. All matrices are dense.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    Ok(())
}

fn check_square(m: &DMatrix<C64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    check_dim(m.nrows())?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

/// Largest entry of `|m − m†|`.
pub(crate) fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Dense operator on the truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    entries: DMatrix<C64>,
}

impl FockOperator {
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        check_square(&entries)?;
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            entries: DMatrix::zeros(dim, dim),
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            entries: DMatrix::identity(dim, dim),
        })
    }

    /// Ladder operator `a` with `a[n−1, n] = √n`.
    pub fn annihilation(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let mut entries = DMatrix::zeros(dim, dim);
        for n in 1..dim {
            entries[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
        }
        Ok(Self { entries })
    }

    pub fn creation(dim: usize) -> Result<Self> {
        Ok(Self::annihilation(dim)?.adjoint())
    }

    /// `a†a`, built directly as `diag(0, 1, …, dim−1)`.
    pub fn number(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::diagonal(&(0..dim).map(|n| n as f64).collect::<Vec<_>>()))
    }

    pub(crate) fn diagonal(values: &[f64]) -> Self {
        let dim = values.len();
        let mut entries = DMatrix::zeros(dim, dim);
        for (n, v) in values.iter().enumerate() {
            entries[(n, n)] = C64::new(*v, 0.0);
        }
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            entries: &self.entries * factor,
        }
    }

    /// `[self, other] = self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other.dim())?;
        Ok(Self {
            entries: &self.entries * &other.entries - &other.entries * &self.entries,
        })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    fn check_same_dim(&self, found: usize) -> Result<()> {
        if self.dim() != found {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

// Arithmetic panics on dimension mismatch, like the underlying nalgebra ops.
impl Add for &FockOperator {
    type Output = FockOperator;
    fn add(self, rhs: Self) -> FockOperator {
        FockOperator {
            entries: &self.entries + &rhs.entries,
        }
    }
}

impl Sub for &FockOperator {
    type Output = FockOperator;
    fn sub(self, rhs: Self) -> FockOperator {
        FockOperator {
            entries: &self.entries - &rhs.entries,
        }
    }
}

impl Mul for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: Self) -> FockOperator {
        FockOperator {
            entries: &self.entries * &rhs.entries,
        }
    }
}

/// Normalized state vector in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Builds a state from raw amplitudes and normalizes it.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut amplitudes = DVector::from_vec(amplitudes);
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: "zero vector cannot be normalized".into(),
            });
        }
        amplitudes /= C64::new(norm, 0.0);
        Ok(Self { amplitudes })
    }

    /// Fock state `|n⟩` in a basis of size `dim`.
    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        check_dim(dim)?;
        if n >= dim {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("level {n} outside a basis of size {dim}"),
            });
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[n] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// Coherent state `|β⟩` truncated to `dim` levels and renormalized.
    pub fn coherent(dim: usize, beta: C64) -> Result<Self> {
        check_dim(dim)?;
        let mut amps = Vec::with_capacity(dim);
        let mut term = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            if n > 0 {
                term *= beta / (n as f64).sqrt();
            }
            amps.push(term);
        }
        Self::new(amps)
    }

    /// Wraps a vector that the caller has already normalized.
    pub(crate) fn from_normalized(amplitudes: DVector<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Density matrix `ρ_nm = ⟨n|ρ|m⟩` in the Fock basis.
///
/// Construction only checks shape and finiteness; use
/// [`DensityMatrix::validate`] to check Hermiticity, trace and positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        check_square(&entries)?;
        Ok(Self { entries })
    }

    pub(crate) fn from_matrix_unchecked(entries: DMatrix<C64>) -> Self {
        Self { entries }
    }

    pub fn fock(dim: usize, n: usize) -> Result<Self> {
        Ok(PureState::fock(dim, n)?.to_density())
    }

    /// Diagonal state with the given (unnormalized) populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        check_dim(populations.len())?;
        let total: f64 = populations.iter().sum();
        if !(total > 0.0) || populations.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "populations",
                reason: "must be finite, nonnegative and not all zero".into(),
            });
        }
        let scaled: Vec<f64> = populations.iter().map(|p| p / total).collect();
        Ok(Self {
            entries: FockOperator::diagonal(&scaled).into_matrix(),
        })
    }

    /// Thermal state with mean occupation `nbar`, truncated to `dim` levels.
    pub fn thermal(dim: usize, nbar: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(nbar >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "nbar",
                reason: format!("{nbar} is negative"),
            });
        }
        let ratio = nbar / (nbar + 1.0);
        let pops: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
        Self::diagonal(&pops)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Hermiticity and trace defects without the eigendecomposition.
    pub fn structure_report(&self, tol: &DensityTolerance) -> ValidationReport {
        let hermiticity_defect = hermiticity_defect(&self.entries);
        let trace_defect = (self.trace() - C64::new(1.0, 0.0)).norm();
        let passed = hermiticity_defect <= tol.hermiticity && trace_defect <= tol.trace;
        ValidationReport {
            hermiticity_defect,
            trace_defect,
            min_eigenvalue: None,
            passed,
        }
    }

    /// Full check including the smallest eigenvalue of the Hermitian part.
    pub fn validate(&self, tol: &DensityTolerance) -> ValidationReport {
        let mut report = self.structure_report(tol);
        let mut hermitian = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        // Strongly graded entries underflow inside the QR sweeps. Dropping
        // them moves no eigenvalue by more than dim·floor.
        let floor = 1e-18 * hermitian.iter().map(|z| z.norm()).fold(0.0, f64::max);
        hermitian.apply(|z| {
            if z.norm() < floor {
                *z = C64::new(0.0, 0.0);
            }
        });
        let min = hermitian
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        report.min_eigenvalue = Some(min);
        report.passed &= min >= -tol.positivity;
        report
    }
}

/// Acceptance thresholds for [`DensityMatrix::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityTolerance {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
}

impl DensityTolerance {
    pub const fn uniform(tol: f64) -> Self {
        Self {
            hermiticity: tol,
            trace: tol,
            positivity: tol,
        }
    }
}

impl Default for DensityTolerance {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            trace: 1e-8,
            positivity: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    /// `None` when only the structural checks ran.
    pub min_eigenvalue: Option<f64>,
    pub passed: bool,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hermiticity defect {:.3e}, trace defect {:.3e}",
            self.hermiticity_defect, self.trace_defect
        )?;
        if let Some(min) = self.min_eigenvalue {
            write!(f, ", min eigenvalue {min:.3e}")?;
        }
        write!(f, " ({})", if self.passed { "pass" } else { "fail" })
    }
}

/// Checks a density matrix against a single tolerance for all three defects.
pub fn validate_density(rho: &DensityMatrix, tol: f64) -> ValidationReport {
    rho.validate(&DensityTolerance::uniform(tol))
}

/// A state an operator can be averaged over.
pub trait QuantumState {
    fn dim(&self) -> usize;
    fn expect_matrix(&self, op: &DMatrix<C64>) -> C64;
}

impl QuantumState for DensityMatrix {
    fn dim(&self) -> usize {
        DensityMatrix::dim(self)
    }

    /// `Tr(op·ρ)` without forming the product.
    fn expect_matrix(&self, op: &DMatrix<C64>) -> C64 {
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += op[(i, k)] * self.entries[(k, i)];
            }
        }
        acc
    }
}

impl QuantumState for PureState {
    fn dim(&self) -> usize {
        PureState::dim(self)
    }

    fn expect_matrix(&self, op: &DMatrix<C64>) -> C64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }
}

/// `Tr(op·ρ)` or `⟨ψ|op|ψ⟩`.
pub fn expectation<S: QuantumState + ?Sized>(op: &FockOperator, state: &S) -> Result<C64> {
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: state.dim(),
        });
    }
    Ok(state.expect_matrix(op.matrix()))
}
