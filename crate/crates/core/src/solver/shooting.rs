//! Single shooting on the initial costate.

use nalgebra::{Matrix6, Vector6};

use super::{
    check_inputs, hamiltonian_drift, inf_norm4, min_separation, stationarity_profile,
    terminal_residual, Method, Solution, SolveOptions, SolveReport,
};
use crate::error::{Error, Result};
use crate::integrate::{induced_controls, integrate_extremal, total_cost, TimeGrid};
use crate::model::{BoundaryConditions, Weights};
use crate::pmp::{Costate, ExtendedState};

/// Terminal state mismatch of the extremal started from costate `q`.
fn shooting_residual(
    bc: &BoundaryConditions,
    w: &Weights,
    grid: &TimeGrid,
    q: &Vector6<f64>,
) -> Result<Option<Vector6<f64>>> {
    let start = ExtendedState {
        state: bc.initial,
        costate: Costate((*q).into()),
    };
    match integrate_extremal(&start, grid, w) {
        Ok((states, _)) => {
            let r = terminal_residual(&states, &bc.terminal);
            let v = Vector6::from(r);
            Ok(v.iter().all(|x| x.is_finite()).then_some(v))
        }
        Err(Error::SeparationTooSmall { .. }) | Err(Error::NonFiniteStage { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `|r|^2` summed as `a + b`.
fn residual_sq(r: &Vector6<f64>) -> f64 {
    let a = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let b = r[3] * r[3] + r[4] * r[4] + r[5] * r[5];
    a + b
}

fn inf_norm6(r: &Vector6<f64>) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Deterministic starting costates: the warm start (or zero), then single
/// components offset by `+-10^(j-2)`, `j = 0, 1, 2`.
fn guess_ladder(warm: Option<Costate>) -> Vec<Vector6<f64>> {
    let base = Vector6::from(warm.unwrap_or(Costate::ZERO).0);
    let mut out = vec![base];
    for j in 0..3 {
        let scale = 10f64.powi(j - 2);
        for i in 0..6 {
            for sign in [1.0, -1.0] {
                let mut q = base;
                q[i] += sign * scale;
                out.push(q);
            }
        }
    }
    out
}

enum ShotOutcome {
    Converged(Vector6<f64>, Vector6<f64>),
    Stuck(Vector6<f64>, Vector6<f64>),
    Exhausted(Vector6<f64>, Vector6<f64>),
}

/// Relative forward-difference step of the Jacobian.
const FD_STEP: f64 = 1e-6;
/// Smallest relative step, reached by shrinking whenever a Gauss-Newton step
/// fails to cut `|R|^2` by a factor four.
const FD_STEP_MIN: f64 = 1e-10;
const FD_SHRINK: f64 = 1e-2;

/// Gauss-Newton on `R(q)` from one starting guess.
fn gauss_newton(
    bc: &BoundaryConditions,
    w: &Weights,
    grid: &TimeGrid,
    opts: &SolveOptions,
    q0: Vector6<f64>,
    budget: &mut usize,
    iterations: &mut usize,
) -> Result<Option<ShotOutcome>> {
    let Some(mut r) = shooting_residual(bc, w, grid, &q0)? else {
        return Ok(None);
    };
    let mut q = q0;
    let mut fd_scale = FD_STEP;
    // Extra iterations after reaching the tolerance, while they keep helping.
    let mut polish = 0;
    loop {
        let norm = inf_norm6(&r);
        if norm <= opts.residual_tolerance && (polish >= 3 || norm == 0.0) {
            return Ok(Some(ShotOutcome::Converged(q, r)));
        }
        if *budget == 0 {
            return Ok(Some(if norm <= opts.residual_tolerance {
                ShotOutcome::Converged(q, r)
            } else {
                ShotOutcome::Exhausted(q, r)
            }));
        }
        *budget -= 1;
        *iterations += 1;

        let mut jac = Matrix6::<f64>::zeros();
        let mut failed = false;
        for i in 0..6 {
            let step = fd_scale * (1.0 + q[i].abs());
            let mut qi = q;
            qi[i] += step;
            match shooting_residual(bc, w, grid, &qi)? {
                Some(ri) => jac.set_column(i, &((ri - r) / step)),
                None => {
                    failed = true;
                    break;
                }
            }
        }
        if failed {
            return Ok(Some(ShotOutcome::Stuck(q, r)));
        }

        let grad = jac.transpose() * r;
        let normal = jac.transpose() * jac;
        let newton = normal
            .cholesky()
            .map(|c| -c.solve(&grad))
            .filter(|d| d.iter().all(|x| x.is_finite()));
        let mut directions = Vec::new();
        if let Some(d) = newton {
            directions.push(d);
        }
        // Steepest descent on |R|^2 / 2, scaled by the Cauchy step.
        let jg = jac * grad;
        let gg = grad.dot(&grad);
        let jgjg = jg.dot(&jg);
        if gg > 0.0 && jgjg > 0.0 {
            directions.push(-grad * (gg / jgjg));
        }
        if directions.is_empty() {
            return Err(Error::SingularJacobian);
        }

        let current = residual_sq(&r);
        let mut accepted = None;
        'dirs: for d in &directions {
            let mut alpha = 1.0;
            for _ in 0..30 {
                let trial = q + d * alpha;
                if let Some(rt) = shooting_residual(bc, w, grid, &trial)? {
                    if residual_sq(&rt) < (1.0 - 1e-4 * alpha) * current {
                        accepted = Some((trial, rt));
                        break 'dirs;
                    }
                }
                alpha *= 0.5;
            }
        }
        match accepted {
            Some((qn, rn)) => {
                let improved = residual_sq(&rn) < 0.25 * current;
                if norm <= opts.residual_tolerance {
                    if !improved {
                        return Ok(Some(ShotOutcome::Converged(q, r)));
                    }
                    polish += 1;
                }
                if !improved {
                    fd_scale = (fd_scale * FD_SHRINK).max(FD_STEP_MIN);
                }
                q = qn;
                r = rn;
            }
            None if norm <= opts.residual_tolerance => {
                return Ok(Some(ShotOutcome::Converged(q, r)));
            }
            None if fd_scale > FD_STEP_MIN => fd_scale = (fd_scale * FD_SHRINK).max(FD_STEP_MIN),
            None => return Ok(Some(ShotOutcome::Stuck(q, r))),
        }
    }
}

/// Single shooting on the initial costate, starting from `warm` when given.
pub fn shooting_solve(
    bc: &BoundaryConditions,
    w: &Weights,
    grid: TimeGrid,
    opts: &SolveOptions,
    warm: Option<Costate>,
) -> Result<Solution> {
    check_inputs(bc, w, &grid, opts)?;
    let mut budget = opts.max_iterations;
    let mut iterations = 0;
    let mut best: Option<(Vector6<f64>, Vector6<f64>)> = None;
    let mut converged = false;
    let mut stop_reason = "no feasible starting costate".to_string();
    for q0 in guess_ladder(warm) {
        let outcome = gauss_newton(bc, w, &grid, opts, q0, &mut budget, &mut iterations)?;
        let (q, r, done) = match outcome {
            None => continue,
            Some(ShotOutcome::Converged(q, r)) => (q, r, Some("converged")),
            Some(ShotOutcome::Exhausted(q, r)) => (q, r, Some("iteration limit")),
            Some(ShotOutcome::Stuck(q, r)) => (q, r, None),
        };
        if best
            .as_ref()
            .is_none_or(|(_, rb)| residual_sq(&r) < residual_sq(rb))
        {
            best = Some((q, r));
        }
        if let Some(reason) = done {
            converged = reason == "converged";
            stop_reason = reason.to_string();
            if converged {
                best = Some((q, r));
            }
            break;
        }
        stop_reason = "Gauss-Newton stalled on every starting costate".to_string();
        if budget == 0 {
            break;
        }
    }
    let Some((q, _)) = best else {
        return Err(Error::Stalled { iterations });
    };

    let start = ExtendedState {
        state: bc.initial,
        costate: Costate(q.into()),
    };
    let (states, costates) = integrate_extremal(&start, &grid, w)?;
    let controls = induced_controls(&states, &costates, w)?;
    let final_cost = total_cost(&states, &controls, w)?;
    let report = SolveReport {
        method: Method::Shooting,
        converged,
        iterations,
        final_cost,
        augmented_cost: final_cost,
        penalty_weights: [0.0; 2],
        terminal_residual: terminal_residual(&states, &bc.terminal),
        max_stationarity: inf_norm4(&stationarity_profile(&states, &costates, &controls, w)),
        hamiltonian_drift: hamiltonian_drift(&states, &costates, &controls, w)?,
        min_separation: min_separation(&states),
        cost_history: Vec::new(),
        stop_reason,
    };
    Ok(Solution {
        states,
        costates,
        controls,
        report,
    })
}
