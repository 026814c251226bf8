//! Driven dissipative Kerr oscillator under a Gaussian pulse train.
//!
//! Units are `ħ = 1` and all rates are measured in units of the decay rate
//! `γ`. The crate provides a truncated Fock space ([`hilbert`]), the model
//! Hamiltonian and Lindblad operators ([`model`]), an adaptive master
//! equation integrator ([`evolve`]), quantum state diffusion trajectories
//! ([`qsd`]) and observables including Wigner functions ([`observe`]).

pub mod error;
pub mod evolve;
pub mod hilbert;
pub mod model;
pub mod observe;
pub mod qsd;
pub mod special;

pub use error::{Error, Result};
pub use evolve::{
    integrate_master, integrate_master_at, steady_state, IntegratorConfig, RunDiagnostics,
    Trajectory,
};
pub use hilbert::{expectation, DensityMatrix, FockOperator, PureState, C64};
pub use model::{Drive, ModelParams, PulseTrain};
pub use qsd::{average_ensemble, run_trajectory, EnsembleResult, QsdConfig};
pub use observe::{
    fidelity, mean_excitation, negativity_volume, populations, wigner_analytic_steady,
    wigner_numeric, GridSpec, WignerGrid,
};

/// The guide in `book/`, compiled so its code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/master-equation.md")]
    mod master_equation {}
    #[doc = include_str!("../../../book/src/trajectories.md")]
    mod trajectories {}
    #[doc = include_str!("../../../book/src/phase-space.md")]
    mod phase_space {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
