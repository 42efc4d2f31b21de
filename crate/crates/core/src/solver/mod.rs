//! Boundary value solvers for the pair.
//!
//! The states are pinned at both ends while the costates are free, so two
//! solvers are provided:
//!
//! * [`fbsm_solve`]: forward-backward sweep. States are integrated forward,
//!   costates backward from a quadratic terminal penalty, and the nodal
//!   controls descend with an Armijo backtracking line search. The penalty
//!   weight of a vehicle grows geometrically whenever the descent stagnates
//!   with that vehicle's terminal residual still above tolerance.
//! * [`shooting_solve`]: single shooting on the six initial costates with a
//!   forward-difference Gauss-Newton iteration.
//!
//! All reductions over the two vehicles are formed as `a + b`, which keeps
//! both solvers exactly equivariant under swapping the vehicles.

mod fbsm;
mod gradient;
mod shooting;

pub use fbsm::{fbsm_from, fbsm_solve, initial_controls};
pub use gradient::{
    adjoint_gradient, compare_gradients, discrete_adjoint, discrete_gradient, fd_cost_gradient,
    GradientAgreement,
};
pub use shooting::shooting_solve;

use crate::error::{Error, Result};
use crate::integrate::{
    integrate_backward, integrate_forward, total_cost, ControlTrajectory, CostateTrajectory,
    StateTrajectory, TimeGrid,
};
use crate::model::{separation_sq, validate_scenario, BoundaryConditions, PairState, Weights, P0};
use crate::pmp::{hamiltonian, stationarity_residual, Costate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Fbsm,
    Shooting,
    /// Forward-backward sweep followed by shooting warm-started from its costate.
    Both,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fbsm => "fbsm",
            Method::Shooting => "shooting",
            Method::Both => "both",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fbsm" => Ok(Method::Fbsm),
            "shooting" => Ok(Method::Shooting),
            "both" => Ok(Method::Both),
            other => Err(format!(
                "unknown method '{other}' (expected fbsm, shooting or both)"
            )),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Terminal term of the sweep objective: per-vehicle quadratic weights plus a
/// linear multiplier term on the final-state mismatch `e = state(T) - target`,
/// `sum_i m_i e_i + sum_v (w_v / 2) |e_v|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalPenalty {
    /// Weights for vehicle a and vehicle b.
    pub weights: [f64; 2],
    /// Multiplier estimates, ordered like [`PairState::to_array`].
    pub multipliers: [f64; 6],
    pub target: PairState,
}

impl TerminalPenalty {
    pub fn uniform(weight: f64, target: PairState) -> Self {
        Self::per_vehicle([weight, weight], target)
    }

    pub fn per_vehicle(weights: [f64; 2], target: PairState) -> Self {
        Self {
            weights,
            multipliers: [0.0; 6],
            target,
        }
    }

    fn mismatch(&self, state: &PairState) -> [f64; 6] {
        let x = state.to_array();
        let y = self.target.to_array();
        std::array::from_fn(|i| x[i] - y[i])
    }

    pub fn value(&self, state: &PairState) -> f64 {
        let e = self.mismatch(state);
        let m = &self.multipliers;
        let part = |v: usize| {
            let r = 3 * v..3 * v + 3;
            let linear: f64 = r.clone().map(|i| m[i] * e[i]).sum();
            let square: f64 = r.map(|i| e[i] * e[i]).sum();
            linear + 0.5 * self.weights[v] * square
        };
        part(0) + part(1)
    }

    /// Costate at `T` of the penalized problem, `P0 (m_i + w_v e_i)`.
    pub fn terminal_costate(&self, state: &PairState) -> Costate {
        let e = self.mismatch(state);
        Costate(std::array::from_fn(|i| {
            P0 * (self.multipliers[i] + self.weights[i / 3] * e[i])
        }))
    }

    /// First-order multiplier update `m_i += w_v e_i` for vehicle `v`.
    pub fn update_multipliers(&mut self, vehicle: usize, state: &PairState) {
        let e = self.mismatch(state);
        for i in 3 * vehicle..3 * vehicle + 3 {
            self.multipliers[i] += self.weights[vehicle] * e[i];
        }
    }
}

/// Geometric continuation of the terminal penalty weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySchedule {
    pub initial: f64,
    pub growth: f64,
    pub max: f64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            initial: 1.0,
            growth: 10.0,
            max: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub method: Method,
    pub max_iterations: usize,
    /// Bound on `max_k |dH/du(t_k)|_inf` for a converged sweep.
    pub gradient_tolerance: f64,
    /// Bound on the relative decrease of the objective for a converged sweep.
    pub cost_tolerance: f64,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub penalty: PenaltySchedule,
    /// Bound on `|R(q)|_inf` for converged shooting.
    pub residual_tolerance: f64,
    /// Terminal residual at which the sweep stops raising a vehicle's penalty.
    pub terminal_tolerance: f64,
    /// Curvature pairs kept for the quasi-Newton direction; zero gives plain
    /// steepest descent.
    pub memory: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: Method::Fbsm,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            cost_tolerance: 1e-8,
            armijo_slope: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            penalty: PenaltySchedule::default(),
            residual_tolerance: 1e-6,
            terminal_tolerance: 1e-3,
            memory: 10,
        }
    }
}

impl SolveOptions {
    /// Every invariant violation, prefixed with the option name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("cost_tolerance", self.cost_tolerance),
            ("initial_step", self.initial_step),
            ("residual_tolerance", self.residual_tolerance),
            ("terminal_tolerance", self.terminal_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name}: must be positive"));
            }
        }
        for (name, v) in [
            ("armijo_slope", self.armijo_slope),
            ("backtrack_factor", self.backtrack_factor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                out.push(format!("{name}: must lie in (0, 1)"));
            }
        }
        let p = &self.penalty;
        if !(p.initial.is_finite() && p.initial >= 0.0) {
            out.push("penalty.initial: must be non-negative".into());
        }
        if !(p.growth.is_finite() && p.growth > 1.0) {
            out.push("penalty.growth: must exceed 1".into());
        }
        if !(p.max.is_finite() && p.max >= p.initial) {
            out.push("penalty.max: must be at least penalty.initial".into());
        }
        out
    }
}

/// One accepted sweep iterate. `stage` counts updates of the terminal term, so
/// the objective is comparable only between records of the same stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRecord {
    pub stage: usize,
    pub penalty_weights: [f64; 2],
    pub augmented_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    /// Cost functional without the penalty term.
    pub final_cost: f64,
    /// Cost plus the terminal penalty in force at exit (equals `final_cost`
    /// for shooting).
    pub augmented_cost: f64,
    pub penalty_weights: [f64; 2],
    /// `state(T) - target`, componentwise.
    pub terminal_residual: [f64; 6],
    pub max_stationarity: f64,
    /// `max_k |H_k - H_0| / (1 + |H_0|)`.
    pub hamiltonian_drift: f64,
    pub min_separation: f64,
    /// Accepted objective values of the sweep, in order (empty for shooting).
    pub cost_history: Vec<CostRecord>,
    pub stop_reason: String,
}

impl SolveReport {
    pub fn terminal_residual_norm(&self) -> f64 {
        self.terminal_residual
            .iter()
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub states: StateTrajectory,
    pub costates: CostateTrajectory,
    pub controls: ControlTrajectory,
    pub report: SolveReport,
}

impl Solution {
    /// The same solution with the vehicles exchanged.
    pub fn swapped(&self) -> Solution {
        let grid = *self.states.grid();
        let swap = |v: &[f64; 6]| [v[3], v[4], v[5], v[0], v[1], v[2]];
        Solution {
            states: StateTrajectory::new(
                grid,
                self.states.nodes().iter().map(|s| s.swapped()).collect(),
            )
            .expect("same grid"),
            costates: CostateTrajectory::new(
                grid,
                self.costates.nodes().iter().map(|p| p.swapped()).collect(),
            )
            .expect("same grid"),
            controls: ControlTrajectory::new(
                grid,
                self.controls.nodes().iter().map(|c| c.swapped()).collect(),
            )
            .expect("same grid"),
            report: SolveReport {
                penalty_weights: [
                    self.report.penalty_weights[1],
                    self.report.penalty_weights[0],
                ],
                terminal_residual: swap(&self.report.terminal_residual),
                cost_history: self
                    .report
                    .cost_history
                    .iter()
                    .map(|c| CostRecord {
                        penalty_weights: [c.penalty_weights[1], c.penalty_weights[0]],
                        ..*c
                    })
                    .collect(),
                ..self.report.clone()
            },
        }
    }
}

/// Read-only diagnostics recomputed from a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub final_cost: f64,
    pub terminal_residual: [f64; 6],
    pub max_stationarity: f64,
    pub hamiltonian_drift: f64,
    pub min_separation: f64,
}

/// Cost functional plus the terminal penalty.
pub fn augmented_cost(
    states: &StateTrajectory,
    u: &ControlTrajectory,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<f64> {
    Ok(total_cost(states, u, w)? + pen.value(states.last()))
}

/// Nodal `dH/du` along a state/costate/control triple.
pub fn stationarity_profile(
    states: &StateTrajectory,
    costates: &CostateTrajectory,
    u: &ControlTrajectory,
    w: &Weights,
) -> Vec<[f64; 4]> {
    states
        .nodes()
        .iter()
        .zip(costates.nodes())
        .zip(u.nodes())
        .map(|((s, p), c)| stationarity_residual(s, p, c, w))
        .collect()
}

pub(crate) fn inf_norm4(v: &[[f64; 4]]) -> f64 {
    v.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

/// Forward states and backward costates for a penalized control trajectory.
pub fn sweep(
    u: &ControlTrajectory,
    bc: &BoundaryConditions,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<(StateTrajectory, CostateTrajectory)> {
    let grid = *u.grid();
    let states = integrate_forward(&bc.initial, u, &grid)?;
    let terminal = pen.terminal_costate(states.last());
    let costates = integrate_backward(&terminal, &states, u, &grid, w)?;
    Ok((states, costates))
}

pub(crate) fn hamiltonian_drift(
    states: &StateTrajectory,
    costates: &CostateTrajectory,
    u: &ControlTrajectory,
    w: &Weights,
) -> Result<f64> {
    let mut h0 = None;
    let mut worst: f64 = 0.0;
    for ((s, p), c) in states.nodes().iter().zip(costates.nodes()).zip(u.nodes()) {
        let h = hamiltonian(s, p, c, w)?;
        let base = *h0.get_or_insert(h);
        worst = worst.max((h - base).abs());
    }
    let base: f64 = h0.unwrap_or(0.0);
    Ok(worst / (1.0 + base.abs()))
}

pub(crate) fn terminal_residual(states: &StateTrajectory, target: &PairState) -> [f64; 6] {
    let x = states.last().to_array();
    let y = target.to_array();
    std::array::from_fn(|i| x[i] - y[i])
}

pub(crate) fn min_separation(states: &StateTrajectory) -> f64 {
    states
        .nodes()
        .iter()
        .map(|s| separation_sq(s).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Recomputes cost, terminal residual, stationarity, Hamiltonian drift and
/// minimum separation of a solution. Read-only.
pub fn check_suite(
    solution: &Solution,
    bc: &BoundaryConditions,
    w: &Weights,
) -> Result<Diagnostics> {
    let Solution {
        states,
        costates,
        controls,
        ..
    } = solution;
    Ok(Diagnostics {
        final_cost: total_cost(states, controls, w)?,
        terminal_residual: terminal_residual(states, &bc.terminal),
        max_stationarity: inf_norm4(&stationarity_profile(states, costates, controls, w)),
        hamiltonian_drift: hamiltonian_drift(states, costates, controls, w)?,
        min_separation: min_separation(states),
    })
}

pub(crate) fn check_inputs(
    bc: &BoundaryConditions,
    w: &Weights,
    grid: &TimeGrid,
    opts: &SolveOptions,
) -> Result<()> {
    validate_scenario(bc, w).map_err(Error::ScenarioInvalid)?;
    let v = opts.violations();
    if !v.is_empty() {
        return Err(Error::OptionsInvalid(v));
    }
    if grid.horizon() != bc.horizon {
        return Err(Error::GridMismatch(format!(
            "grid horizon {} differs from scenario horizon {}",
            grid.horizon(),
            bc.horizon
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vehicle {
    A,
    B,
}

/// The single-vehicle subproblem of `vehicle`: the other vehicle is parked at
/// its initial configuration with zero attraction and repulsion is switched
/// off, so it contributes exactly nothing to the cost or gradient.
pub fn isolate_vehicle(
    bc: &BoundaryConditions,
    w: &Weights,
    vehicle: Vehicle,
) -> (BoundaryConditions, Weights) {
    let mut sub = *bc;
    let mut ws = Weights { rho: 0.0, ..*w };
    match vehicle {
        Vehicle::A => {
            sub.terminal.b = bc.initial.b;
            ws.alpha = 0.0;
        }
        Vehicle::B => {
            sub.terminal.a = bc.initial.a;
            ws.beta = 0.0;
        }
    }
    (sub, ws)
}

/// Runs the method selected in `opts`. For [`Method::Both`] the first element
/// is the shooting solution warm-started from the sweep and the second is the
/// sweep itself.
pub fn solve(
    bc: &BoundaryConditions,
    w: &Weights,
    grid: TimeGrid,
    opts: &SolveOptions,
) -> Result<(Solution, Option<Solution>)> {
    match opts.method {
        Method::Fbsm => Ok((fbsm_solve(bc, w, grid, opts)?, None)),
        Method::Shooting => Ok((shooting_solve(bc, w, grid, opts, None)?, None)),
        Method::Both => {
            let sweep = fbsm_solve(bc, w, grid, opts)?;
            let warm = *sweep.costates.first();
            let mut shot = shooting_solve(bc, w, grid, opts, Some(warm))?;
            shot.report.method = Method::Both;
            Ok((shot, Some(sweep)))
        }
    }
}
