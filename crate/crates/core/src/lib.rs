//! Simulation engine for a quantum Otto heat engine built on an optomechanical
//! cavity: a thermally driven optical mode (the working fluid) coupled to a
//! mechanical resonator (the piston) through either a quadratic
//! `g n_a (b + b†)^2` or a linear `g n_a (b + b†)` interaction.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: truncated Fock-space ladder operators and tensor products.
//! * [`model`]: physical parameters, Hamiltonians, bath occupations and the
//!   square-wave drive schedule.
//! * [`lindblad`]: the piecewise-constant Liouvillian, RK4 and
//!   matrix-exponential propagation, and the stroboscopic limit-cycle search.
//! * [`states`]: reduced states, Wigner functions, entropies, ergotropy and
//!   free-energy work capacity.
//! * [`thermo`]: the effective Otto cycle and the engine figures of merit.
//! * [`moments`]: a closed moment hierarchy used as a fast approximate solver.
//!
//! Units: `hbar = k_B = 1` and the mechanical frequency sets the scale, so
//! every frequency and rate is a multiple of `omega_b` and time is measured
//! in `1/omega_b`.

pub mod error;
pub mod fock;
pub mod lindblad;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod sparse;
pub mod states;
pub mod thermo;

pub use error::{Error, Result};
pub use fock::{Operator, Space};
pub use lindblad::{
    build_liouvillian, evolve, limit_cycle, Backend, DensityMatrix, Liouvillian, RecordMode,
    SolverOptions, Trajectory,
};
pub use model::{CouplingKind, DriveMode, DriveSchedule, EngineParams};
pub use states::{Mode, ReducedState, WignerGrid};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
