//! Scenario files, run artifacts and the `solve`, `check` and `sweep`
//! commands of the `dubins-pair` binary.

pub mod commands;
pub mod output;
pub mod scenario;

pub use commands::{run_check, run_solve, run_sweep, Exit};
pub use scenario::{parse_scenario, ScenarioError, ScenarioFile};
