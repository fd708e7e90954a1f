//! Simulation and analysis of open-system quantum chaos in a periodically
//! driven Rabi model (a qubit coupled to a pumped resonator mode whose
//! position quadrature is continuously measured).
//!
//! The crate is organised by method:
//!
//! - [`model`]: physical parameters, drive, adiabatic potentials and fixed points.
//! - [`semiclassical`]: mean-field equations of motion, truncated-Wigner
//!   ensembles, stroboscopic maps and Lyapunov exponents.
//! - [`quantum`]: split-operator propagation of the qubit-field spinor,
//!   quantum-jump unravelling of the measurement master equation, and a
//!   Fock-basis master-equation integrator used as an oracle.
//! - [`phasespace`]: Wigner and Husimi distributions, negative fractions,
//!   marginals and phase-space widths.
//! - [`observables`]: Fock projections, ensemble density matrices,
//!   negativity, purity and photon statistics.
//!
//! Units are dimensionless with the mode frequency set to one and ħ = 1.
//! Qubit spinors are ordered `[|e⟩, |g⟩]` so that `σ_z = diag(1, -1)`.

pub mod error;
pub mod model;
pub mod observables;
pub mod ode;
pub mod phasespace;
pub mod quantum;
pub mod rng;
pub mod semiclassical;

pub use error::{Error, Result};
pub use model::{AdiabaticBranch, FixedPoint, Minimum, ModelParams};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
