//! Fixed-step RK4 on a uniform grid: forward states, backward costates,
//! the 12-dimensional extremal system, and trapezoidal cost quadrature.
//!
//! Controls and stored states are nodal values with piecewise-linear
//! interpolation; RK4 half-step stages read the interpolant.

use crate::error::{Error, Result};
use crate::model::{dynamics_rhs, running_cost, ControlPair, PairState, Weights};
use crate::pmp::{adjoint_rhs, closed_loop_rhs, Costate, ExtendedState};

/// Uniform grid `t_k = T * (k / N)`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 steps, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Node time; `time(steps) == horizon` exactly.
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * (k as f64 / self.steps as f64)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|k| self.time(k))
    }

    /// Trapezoid quadrature weights: `h` inside, `h/2` at both ends.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.step_size();
        (0..=self.steps)
            .map(|k| {
                if k == 0 || k == self.steps {
                    0.5 * h
                } else {
                    h
                }
            })
            .collect()
    }
}

/// Values that can be linearly interpolated between grid nodes.
pub trait Interpolate: Copy {
    fn lerp(&self, other: &Self, s: f64) -> Self;
}

fn lerp_array<const N: usize>(a: [f64; N], b: [f64; N], s: f64) -> [f64; N] {
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = (1.0 - s) * a[i] + s * b[i];
    }
    out
}

impl Interpolate for PairState {
    fn lerp(&self, other: &Self, s: f64) -> Self {
        PairState::from_array(lerp_array(self.to_array(), other.to_array(), s))
    }
}

impl Interpolate for ControlPair {
    fn lerp(&self, other: &Self, s: f64) -> Self {
        ControlPair::from_array(lerp_array(self.to_array(), other.to_array(), s))
    }
}

impl Interpolate for Costate {
    fn lerp(&self, other: &Self, s: f64) -> Self {
        Costate(lerp_array(self.0, other.0, s))
    }
}

/// Nodal values on a [`TimeGrid`], one per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    grid: TimeGrid,
    nodes: Vec<T>,
}

pub type StateTrajectory = Trajectory<PairState>;
pub type CostateTrajectory = Trajectory<Costate>;
pub type ControlTrajectory = Trajectory<ControlPair>;

impl<T: Interpolate> Trajectory<T> {
    pub fn new(grid: TimeGrid, nodes: Vec<T>) -> Result<Self> {
        if nodes.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} nodes for a grid of {} steps",
                nodes.len(),
                grid.steps()
            )));
        }
        Ok(Self { grid, nodes })
    }

    pub fn constant(grid: TimeGrid, value: T) -> Self {
        Self {
            grid,
            nodes: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [T] {
        &mut self.nodes
    }

    pub fn into_nodes(self) -> Vec<T> {
        self.nodes
    }

    pub fn first(&self) -> &T {
        &self.nodes[0]
    }

    pub fn last(&self) -> &T {
        &self.nodes[self.nodes.len() - 1]
    }

    /// Interpolant at `t`, known to lie in segment `[t_k, t_{k+1}]`.
    pub fn on_segment(&self, k: usize, t: f64) -> T {
        let s = ((t - self.grid.time(k)) / self.grid.step_size()).clamp(0.0, 1.0);
        self.nodes[k].lerp(&self.nodes[k + 1], s)
    }

    /// Piecewise-linear interpolant at any `t` in `[0, T]` (clamped outside).
    pub fn at(&self, t: f64) -> T {
        let n = self.grid.steps();
        let k = ((t / self.grid.step_size()).floor().max(0.0) as usize).min(n - 1);
        self.on_segment(k, t)
    }
}

fn check_grids(a: &TimeGrid, b: &TimeGrid, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "{what}: ({}, {}) vs ({}, {})",
            a.horizon(),
            a.steps(),
            b.horizon(),
            b.steps()
        )));
    }
    Ok(())
}

/// One classical RK4 step of `x' = f(t, x)`. A negative `h` integrates backward.
pub fn rk4_step<const N: usize, F>(mut rhs: F, x: &[f64; N], t: f64, h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut stage = |tt: f64, y: &[f64; N]| -> Result<[f64; N]> {
        let k = rhs(tt, y)?;
        if k.iter().all(|v| v.is_finite()) {
            Ok(k)
        } else {
            Err(Error::NonFiniteStage { t: tt })
        }
    };
    let offset = |k: &[f64; N], c: f64| -> [f64; N] {
        let mut y = *x;
        for i in 0..N {
            y[i] += c * k[i];
        }
        y
    };
    let half = 0.5 * h;
    let k1 = stage(t, x)?;
    let k2 = stage(t + half, &offset(&k1, half))?;
    let k3 = stage(t + half, &offset(&k2, half))?;
    let k4 = stage(t + h, &offset(&k3, h))?;
    let mut out = *x;
    for i in 0..N {
        out[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::SeparationTooSmall { separation_sq, .. } => Error::SeparationTooSmall {
            separation_sq,
            step: Some(step),
        },
        other => other,
    }
}

fn guard(state: &PairState, step: usize) -> Result<()> {
    crate::model::guarded_separation_sq(state)
        .map(|_| ())
        .map_err(|e| at_step(e, step))
}

/// Integrates the pair dynamics forward under a nodal control trajectory.
pub fn integrate_forward(
    initial: &PairState,
    u: &ControlTrajectory,
    grid: &TimeGrid,
) -> Result<StateTrajectory> {
    check_grids(u.grid(), grid, "control vs grid")?;
    guard(initial, 0)?;
    let h = grid.step_size();
    let mut nodes = Vec::with_capacity(grid.len());
    nodes.push(*initial);
    let mut x = initial.to_array();
    for k in 0..grid.steps() {
        let rhs = |t: f64, y: &[f64; 6]| {
            Ok(dynamics_rhs(
                &PairState::from_array(*y),
                &u.on_segment(k, t),
            ))
        };
        x = rk4_step(rhs, &x, grid.time(k), h)?;
        let s = PairState::from_array(x);
        guard(&s, k + 1)?;
        nodes.push(s);
    }
    Ok(Trajectory { grid: *grid, nodes })
}

/// Integrates the adjoint field backward from `terminal` at `t = T`, reading
/// the stored states and controls by interpolation.
pub fn integrate_backward(
    terminal: &Costate,
    states: &StateTrajectory,
    u: &ControlTrajectory,
    grid: &TimeGrid,
    w: &Weights,
) -> Result<CostateTrajectory> {
    check_grids(states.grid(), grid, "states vs grid")?;
    check_grids(u.grid(), grid, "controls vs grid")?;
    let h = grid.step_size();
    let n = grid.steps();
    let mut nodes = vec![Costate::ZERO; grid.len()];
    nodes[n] = *terminal;
    let mut p = terminal.0;
    for k in (0..n).rev() {
        let rhs = |t: f64, y: &[f64; 6]| {
            let s = states.on_segment(k, t);
            let c = u.on_segment(k, t);
            adjoint_rhs(&s, &Costate(*y), &c, w)
        };
        p = rk4_step(rhs, &p, grid.time(k + 1), -h).map_err(|e| at_step(e, k))?;
        nodes[k] = Costate(p);
    }
    Ok(Trajectory { grid: *grid, nodes })
}

/// Integrates the closed-loop extremal system from `start`.
pub fn integrate_extremal(
    start: &ExtendedState,
    grid: &TimeGrid,
    w: &Weights,
) -> Result<(StateTrajectory, CostateTrajectory)> {
    guard(&start.state, 0)?;
    let h = grid.step_size();
    let mut states = Vec::with_capacity(grid.len());
    let mut costates = Vec::with_capacity(grid.len());
    states.push(start.state);
    costates.push(start.costate);
    let mut z = start.to_array();
    for k in 0..grid.steps() {
        let rhs = |_t: f64, y: &[f64; 12]| closed_loop_rhs(&ExtendedState::from_array(*y), w);
        z = rk4_step(rhs, &z, grid.time(k), h).map_err(|e| at_step(e, k))?;
        let ext = ExtendedState::from_array(z);
        guard(&ext.state, k + 1)?;
        states.push(ext.state);
        costates.push(ext.costate);
    }
    Ok((
        Trajectory {
            grid: *grid,
            nodes: states,
        },
        Trajectory {
            grid: *grid,
            nodes: costates,
        },
    ))
}

/// Stationary controls induced by a state/costate pair at every node.
pub fn induced_controls(
    states: &StateTrajectory,
    costates: &CostateTrajectory,
    w: &Weights,
) -> Result<ControlTrajectory> {
    check_grids(states.grid(), costates.grid(), "states vs costates")?;
    let nodes = states
        .nodes()
        .iter()
        .zip(costates.nodes())
        .map(|(s, p)| crate::pmp::optimal_control(s, p, w))
        .collect();
    Ok(Trajectory {
        grid: *states.grid(),
        nodes,
    })
}

/// One RK4 stage of the forward sweep: stage state, stage control and the
/// interpolation weight of node `k + 1` in that control.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stage {
    pub state: PairState,
    pub control: ControlPair,
    pub upper_weight: f64,
}

/// RK4 quadrature weights of the four stages, in units of the step size.
pub(crate) const STAGE_WEIGHTS: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];

/// Recomputes the four stages of forward step `k` starting from `x`, with the
/// same arithmetic as [`integrate_forward`].
pub(crate) fn forward_stages(x: &PairState, u: &ControlTrajectory, k: usize) -> [Stage; 4] {
    let grid = u.grid();
    let h = grid.step_size();
    let half = 0.5 * h;
    let t = grid.time(k);
    let control_at = |tt: f64| {
        let s = ((tt - t) / h).clamp(0.0, 1.0);
        (u.on_segment(k, tt), s)
    };
    let advance = |k_prev: &[f64; 6], c: f64| {
        let mut y = x.to_array();
        for i in 0..6 {
            y[i] += c * k_prev[i];
        }
        PairState::from_array(y)
    };
    let (c1, s1) = control_at(t);
    let x1 = *x;
    let k1 = dynamics_rhs(&x1, &c1);
    let (c2, s2) = control_at(t + half);
    let x2 = advance(&k1, half);
    let k2 = dynamics_rhs(&x2, &c2);
    let x3 = advance(&k2, half);
    let k3 = dynamics_rhs(&x3, &c2);
    let (c4, s4) = control_at(t + h);
    let x4 = advance(&k3, h);
    [
        Stage {
            state: x1,
            control: c1,
            upper_weight: s1,
        },
        Stage {
            state: x2,
            control: c2,
            upper_weight: s2,
        },
        Stage {
            state: x3,
            control: c2,
            upper_weight: s2,
        },
        Stage {
            state: x4,
            control: c4,
            upper_weight: s4,
        },
    ]
}

/// Trapezoidal quadrature of the running cost on the nodes,
/// `(h/2) sum (L_k + L_{k+1})`.
pub fn total_cost(states: &StateTrajectory, u: &ControlTrajectory, w: &Weights) -> Result<f64> {
    check_grids(states.grid(), u.grid(), "states vs controls")?;
    let h = states.grid().step_size();
    let mut values = Vec::with_capacity(states.nodes().len());
    for (k, (s, c)) in states.nodes().iter().zip(u.nodes()).enumerate() {
        values.push(running_cost(s, c, w).map_err(|e| at_step(e, k))?);
    }
    let sum: f64 = values.windows(2).map(|pair| pair[0] + pair[1]).sum();
    Ok(0.5 * h * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VehicleState;

    #[test]
    fn grid_endpoints_exact() {
        for (t, n) in [(0.1, 3), (10.0, 2000), (0.7, 7), (1.0 / 3.0, 999)] {
            let g = TimeGrid::new(t, n).unwrap();
            assert_eq!(g.time(0), 0.0);
            assert_eq!(g.time(n), t);
            assert!(g
                .times()
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[1] > w[0]));
        }
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
    }

    #[test]
    fn rk4_exponential_step() {
        let x = rk4_step(|_, y: &[f64; 1]| Ok([y[0]]), &[1.0], 0.0, 0.1).unwrap();
        let by_hand = 1.0 + (0.1 / 6.0) * (1.0 + 2.0 * 1.05 + 2.0 * 1.0525 + 1.10525);
        assert!((x[0] - by_hand).abs() < 1e-15);
        assert!((x[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn rk4_trivial_fields() {
        let x = rk4_step(|_, _: &[f64; 2]| Ok([0.0, 0.0]), &[3.0, -2.0], 1.0, 0.37).unwrap();
        assert_eq!(x, [3.0, -2.0]);
        let x = rk4_step(|_, _: &[f64; 1]| Ok([2.0]), &[1.0], 0.0, 0.25).unwrap();
        assert_eq!(x, [1.5]);
    }

    #[test]
    fn rk4_flags_non_finite_stage() {
        let r = rk4_step(|_, _: &[f64; 1]| Ok([f64::NAN]), &[1.0], 0.0, 0.1);
        assert!(matches!(r, Err(Error::NonFiniteStage { .. })));
    }

    #[test]
    fn forward_heading_exact_under_constant_turn() {
        let g = TimeGrid::new(1.0, 50).unwrap();
        let init = PairState::new(
            VehicleState::new(0.0, 0.0, 0.3),
            VehicleState::new(5.0, 0.0, 0.0),
        );
        let u = ControlTrajectory::constant(g, ControlPair::new(0.0, 0.7, 0.0, 0.0));
        let traj = integrate_forward(&init, &u, &g).unwrap();
        assert!((traj.last().a.heading - 1.0).abs() < 1e-15);
        assert_eq!(traj.last().a.pos1, 0.0);
        let still = integrate_forward(
            &init,
            &ControlTrajectory::constant(g, ControlPair::ZERO),
            &g,
        )
        .unwrap();
        assert!(still.nodes().iter().all(|s| *s == init));
    }

    #[test]
    fn forward_reports_collision_step() {
        let g = TimeGrid::new(2.0, 20).unwrap();
        let init = PairState::new(
            VehicleState::new(0.0, 0.0, 0.0),
            VehicleState::new(0.0, 1.0, 0.0),
        );
        // Vehicle a drives along pos2 at unit speed and reaches b at t = 1 (node 10).
        let u = ControlTrajectory::constant(g, ControlPair::new(1.0, 0.0, 0.0, 0.0));
        match integrate_forward(&init, &u, &g) {
            Err(Error::SeparationTooSmall { step, .. }) => assert_eq!(step, Some(10)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trapezoid_constant_integrand() {
        let w = Weights {
            delta: 1.0,
            beta: 0.3,
            alpha: 0.0,
            rho: 0.2,
        };
        let g = TimeGrid::new(2.0, 10).unwrap();
        let init = PairState::new(
            VehicleState::new(1.0, 0.0, 0.0),
            VehicleState::new(0.0, 0.0, 0.0),
        );
        let u = ControlTrajectory::constant(g, ControlPair::ZERO);
        let states = integrate_forward(&init, &u, &g).unwrap();
        let j = total_cost(&states, &u, &w).unwrap();
        assert!((j - (w.beta + w.rho)).abs() < 1e-14);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let g2 = TimeGrid::new(1.0, 11).unwrap();
        let u = ControlTrajectory::constant(g2, ControlPair::ZERO);
        let init = PairState::new(
            VehicleState::new(0.0, 0.0, 0.0),
            VehicleState::new(1.0, 0.0, 0.0),
        );
        assert!(matches!(
            integrate_forward(&init, &u, &g),
            Err(Error::GridMismatch(_))
        ));
        assert!(ControlTrajectory::new(g, vec![ControlPair::ZERO; 3]).is_err());
    }
}
