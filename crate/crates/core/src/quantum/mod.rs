//! Quantum propagation of the qubit–field spinor on a position grid, the
//! quantum-jump unravelling of the position-measurement master equation, and
//! a Fock-basis master-equation integrator used as an independent reference.

pub mod grid;
pub mod io;
pub mod master;
pub mod spectral;
pub mod spinor;
pub mod split;
pub mod trajectory;

pub use grid::QuadratureGrid;
pub use master::{direct_lindblad_oracle, OracleOptions};
pub use spectral::Spectral;
pub use spinor::{build_initial_state, Moments, SpinorState};
pub use split::{JumpChannel, SplitOperator};
pub use trajectory::{run_ensemble, run_trajectory, run_trajectory_with, JumpRecord, TrajectoryConfig};
