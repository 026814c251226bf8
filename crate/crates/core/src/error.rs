use crate::hilbert::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid basis dimension {dim}: at least 2 Fock states are required")]
    InvalidDimension { dim: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular parameters: {0}")]
    SingularParameter(String),

    #[error("parameter `{0}` leaves the quantity undefined")]
    UndefinedParameter(&'static str),

    #[error("step size underflow at t = {t}: dt = {dt:e} (problem too stiff for the explicit integrator)")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("density matrix failed validation at t = {t}: {report}")]
    Integrity { t: f64, report: ValidationReport },

    #[error("no steady state by t = {t}: last max-norm change {defect:e}")]
    Convergence { t: f64, defect: f64 },

    #[error("state norm collapsed to {norm:e} at t = {t}; reduce dt")]
    NormCollapse { t: f64, norm: f64 },

    #[error("Bessel series did not converge within {terms} terms for |z| = {modulus}")]
    BesselRange { terms: usize, modulus: f64 },

    #[error("Wigner function has imaginary residue {residue:e}")]
    ImaginaryResidue { residue: f64 },
}
