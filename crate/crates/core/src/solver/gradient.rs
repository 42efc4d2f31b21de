//! Control gradients of the penalized cost: the continuous-adjoint estimate,
//! the exact gradient of the discretized cost, and a finite-difference oracle.

use super::{augmented_cost, stationarity_profile, sweep, TerminalPenalty};
use crate::error::Result;
use crate::integrate::{
    forward_stages, integrate_forward, ControlTrajectory, StateTrajectory, STAGE_WEIGHTS,
};
use crate::model::{BoundaryConditions, ControlPair, PairState, Weights};
use crate::pmp::{adjoint_rhs, Costate};

/// Gradient from the continuous adjoint: `-w_k dH/du(t_k)` with trapezoid
/// weights `w_k` (`h` inside, `h/2` at the ends).
pub fn adjoint_gradient(
    u: &ControlTrajectory,
    bc: &BoundaryConditions,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<Vec<[f64; 4]>> {
    let (states, costates) = sweep(u, bc, w, pen)?;
    let r = stationarity_profile(&states, &costates, u, w);
    let weights = u.grid().trapezoid_weights();
    Ok(r.iter()
        .zip(weights)
        .map(|(rk, wk)| rk.map(|v| -wk * v))
        .collect())
}

/// Central finite differences of [`augmented_cost`] in every nodal control
/// component, step `1e-6 (1 + |u|)`. Costs `8 (N + 1)` forward integrations.
pub fn fd_cost_gradient(
    u: &ControlTrajectory,
    bc: &BoundaryConditions,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<Vec<[f64; 4]>> {
    let grid = *u.grid();
    let cost = |trial: &ControlTrajectory| -> Result<f64> {
        let states = integrate_forward(&bc.initial, trial, &grid)?;
        augmented_cost(&states, trial, w, pen)
    };
    let mut trial = u.clone();
    let mut out = vec![[0.0; 4]; grid.len()];
    for k in 0..grid.len() {
        let base = u.nodes()[k].to_array();
        for i in 0..4 {
            let step = 1e-6 * (1.0 + base[i].abs());
            let mut c = base;
            c[i] = base[i] + step;
            trial.nodes_mut()[k] = ControlPair::from_array(c);
            let plus = cost(&trial)?;
            c[i] = base[i] - step;
            trial.nodes_mut()[k] = ControlPair::from_array(c);
            let minus = cost(&trial)?;
            out[k][i] = (plus - minus) / (2.0 * step);
        }
        trial.nodes_mut()[k] = u.nodes()[k];
    }
    Ok(out)
}

/// Agreement of two nodal gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientAgreement {
    pub cosine: f64,
    /// `|a - b|_2 / |b|_2`.
    pub relative_l2: f64,
}

/// Compares `estimate` against `reference`.
pub fn compare_gradients(estimate: &[[f64; 4]], reference: &[[f64; 4]]) -> GradientAgreement {
    let a = estimate.iter().flatten();
    let b = reference.iter().flatten();
    let (mut dot, mut aa, mut bb, mut diff) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
        diff += (x - y) * (x - y);
    }
    GradientAgreement {
        cosine: dot / (aa.sqrt() * bb.sqrt()),
        relative_l2: diff.sqrt() / bb.sqrt(),
    }
}

/// `(mu^T df/dx, mu^T df/du)` for the dynamics at one state and control.
fn dynamics_vjp(x: &PairState, c: &ControlPair, mu: &[f64; 6]) -> ([f64; 6], [f64; 4]) {
    let (sa, ca) = x.a.heading.sin_cos();
    let (sb, cb) = x.b.heading.sin_cos();
    let dx = [
        0.0,
        0.0,
        c.u1 * (mu[0] * ca - mu[1] * sa),
        0.0,
        0.0,
        c.v1 * (mu[3] * cb - mu[4] * sb),
    ];
    let du = [
        mu[0] * sa + mu[1] * ca,
        mu[2],
        mu[3] * sb + mu[4] * cb,
        mu[5],
    ];
    (dx, du)
}

/// Exact gradient of [`augmented_cost`] with respect to the nodal controls,
/// by reverse-mode differentiation through the RK4 steps of the forward
/// sweep and the trapezoid quadrature of the cost.
pub fn discrete_gradient(
    u: &ControlTrajectory,
    states: &StateTrajectory,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<Vec<[f64; 4]>> {
    Ok(discrete_adjoint(u, states, w, pen)?.0)
}

/// Nodal control gradient together with `d(objective)/d(state_k)` at every node.
pub fn discrete_adjoint(
    u: &ControlTrajectory,
    states: &StateTrajectory,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<(Vec<[f64; 4]>, Vec<[f64; 6]>)> {
    let grid = u.grid();
    let h = grid.step_size();
    let weights = grid.trapezoid_weights();
    // Node k's share of the quadrature: state part from the adjoint field at
    // zero costate (which is dL/dx), control part delta * u.
    let node_terms = |k: usize| -> Result<([f64; 6], [f64; 4])> {
        let (x, c) = (&states.nodes()[k], &u.nodes()[k]);
        let lx = adjoint_rhs(x, &Costate::ZERO, c, w)?.map(|v| weights[k] * v);
        let lu = c.to_array().map(|v| weights[k] * w.delta * v);
        Ok((lx, lu))
    };
    let mut grad = vec![[0.0; 4]; grid.len()];
    let mut lambdas = vec![[0.0; 6]; grid.len()];
    let n = grid.steps();
    // d(penalty)/d(state(T)) is the negated penalized terminal costate.
    let mut lambda = pen.terminal_costate(states.last()).0.map(|p| -p);
    let (lx, lu) = node_terms(n)?;
    for i in 0..6 {
        lambda[i] += lx[i];
    }
    grad[n] = lu;
    lambdas[n] = lambda;
    // Stage s + 1 starts from x + c_s K_s.
    let offsets = [0.5 * h, 0.5 * h, h];
    for k in (0..n).rev() {
        let stages = forward_stages(&states.nodes()[k], u, k);
        let mut next_lambda = lambda;
        let mut carried = [0.0; 6];
        for s in (0..4).rev() {
            let b = h * STAGE_WEIGHTS[s];
            let mu: [f64; 6] = std::array::from_fn(|i| b * lambda[i] + carried[i]);
            let stage = &stages[s];
            let (dx, du) = dynamics_vjp(&stage.state, &stage.control, &mu);
            let upper = stage.upper_weight;
            for i in 0..4 {
                grad[k][i] += (1.0 - upper) * du[i];
                grad[k + 1][i] += upper * du[i];
            }
            for i in 0..6 {
                next_lambda[i] += dx[i];
                if s > 0 {
                    carried[i] = offsets[s - 1] * dx[i];
                }
            }
        }
        let (lx, lu) = node_terms(k)?;
        for i in 0..6 {
            next_lambda[i] += lx[i];
        }
        for i in 0..4 {
            grad[k][i] += lu[i];
        }
        lambda = next_lambda;
        lambdas[k] = lambda;
    }
    Ok((grad, lambdas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::TimeGrid;
    use crate::model::VehicleState;

    fn scenario() -> (BoundaryConditions, Weights, ControlTrajectory) {
        let bc = BoundaryConditions {
            initial: PairState::new(
                VehicleState::new(0.0, 0.0, 0.2),
                VehicleState::new(2.0, 0.5, -0.4),
            ),
            terminal: PairState::new(
                VehicleState::new(1.0, 1.0, 0.0),
                VehicleState::new(1.5, 2.0, 0.3),
            ),
            horizon: 2.0,
        };
        let w = Weights {
            delta: 0.7,
            beta: 0.2,
            alpha: 0.1,
            rho: 0.5,
        };
        let grid = TimeGrid::new(2.0, 16).unwrap();
        let nodes = grid
            .times()
            .map(|t| {
                ControlPair::new(
                    0.5 + 0.2 * t,
                    (1.3 * t).sin(),
                    0.8 - 0.1 * t * t,
                    0.3 * (2.0 * t).cos(),
                )
            })
            .collect();
        (bc, w, ControlTrajectory::new(grid, nodes).unwrap())
    }

    #[test]
    fn discrete_gradient_matches_finite_differences() {
        let (bc, w, u) = scenario();
        let pen = TerminalPenalty::per_vehicle([3.0, 0.5], bc.terminal);
        let states = integrate_forward(&bc.initial, &u, u.grid()).unwrap();
        let exact = discrete_gradient(&u, &states, &w, &pen).unwrap();
        let fd = fd_cost_gradient(&u, &bc, &w, &pen).unwrap();
        for (k, (a, b)) in exact.iter().zip(&fd).enumerate() {
            for i in 0..4 {
                assert!(
                    (a[i] - b[i]).abs() < 1e-8 * (1.0 + b[i].abs()),
                    "node {k} component {i}: {} vs {}",
                    a[i],
                    b[i]
                );
            }
        }
    }

    #[test]
    fn zero_problem_has_zero_gradient() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let s = PairState::new(
            VehicleState::new(1.0, 0.0, 0.0),
            VehicleState::new(-1.0, 0.0, 1.0),
        );
        let bc = BoundaryConditions {
            initial: s,
            terminal: s,
            horizon: 1.0,
        };
        let w = Weights {
            delta: 1.0,
            beta: 0.0,
            alpha: 0.0,
            rho: 0.0,
        };
        let pen = TerminalPenalty::uniform(0.0, s);
        let u = ControlTrajectory::constant(grid, ControlPair::ZERO);
        assert!(fd_cost_gradient(&u, &bc, &w, &pen)
            .unwrap()
            .iter()
            .flatten()
            .all(|g| *g == 0.0));
        assert!(adjoint_gradient(&u, &bc, &w, &pen)
            .unwrap()
            .iter()
            .flatten()
            .all(|g| *g == 0.0));
    }
}
