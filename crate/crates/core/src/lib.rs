//! Pontryagin-extremal trajectories for a pair of Dubins vehicles that must
//! reach fixed end configurations without colliding.
//!
//! * [`model`]: kinematics, weights and the running cost.
//! * [`pmp`]: Hamiltonian, adjoint field and stationary controls.
//! * [`integrate`]: fixed-step RK4 integration and cost quadrature.
//! * [`solver`]: forward-backward sweep and single shooting.

pub mod error;
pub mod integrate;
pub mod model;
pub mod pmp;
pub mod solver;

pub use error::{Error, Result};
pub use integrate::{ControlTrajectory, CostateTrajectory, StateTrajectory, TimeGrid, Trajectory};
pub use model::{
    BoundaryConditions, ControlPair, PairState, VehicleState, Weights, P0, SEPARATION_GUARD,
};
pub use pmp::{Costate, ExtendedState};
pub use solver::{
    check_suite, fbsm_solve, isolate_vehicle, shooting_solve, solve, CostRecord, Diagnostics,
    Method, PenaltySchedule, Solution, SolveOptions, SolveReport, TerminalPenalty, Vehicle,
};
