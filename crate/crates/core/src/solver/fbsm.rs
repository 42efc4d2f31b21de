//! Forward-backward sweep.

use std::collections::VecDeque;

use super::gradient::discrete_gradient;
use super::{
    augmented_cost, check_inputs, hamiltonian_drift, inf_norm4, min_separation,
    stationarity_profile, sweep, terminal_residual, CostRecord, Method, Solution, SolveOptions,
    SolveReport, TerminalPenalty,
};
use crate::error::{Error, Result};
use crate::integrate::{
    integrate_forward, total_cost, ControlTrajectory, CostateTrajectory, StateTrajectory, TimeGrid,
};
use crate::model::{BoundaryConditions, ControlPair, VehicleState, Weights};

type Field = Vec<[f64; 4]>;

/// Constant controls that steer each vehicle toward its target: straight-line
/// distance over the horizon for speed, heading change over the horizon for
/// turn rate.
pub fn initial_controls(bc: &BoundaryConditions, grid: TimeGrid) -> ControlTrajectory {
    let t = bc.horizon;
    let guess = |from: &VehicleState, to: &VehicleState| {
        let d1 = to.pos1 - from.pos1;
        let d2 = to.pos2 - from.pos2;
        (
            (d1 * d1 + d2 * d2).sqrt() / t,
            (to.heading - from.heading) / t,
        )
    };
    let (u1, u2) = guess(&bc.initial.a, &bc.terminal.a);
    let (v1, v2) = guess(&bc.initial.b, &bc.terminal.b);
    ControlTrajectory::constant(grid, ControlPair::new(u1, u2, v1, v2))
}

/// Nodal control fields with the trapezoid-weighted inner product.
struct ControlSpace {
    weights: Vec<f64>,
}

impl ControlSpace {
    fn dot(&self, x: &Field, y: &Field) -> f64 {
        let mut a = 0.0;
        let mut b = 0.0;
        for ((xk, yk), wk) in x.iter().zip(y).zip(&self.weights) {
            a += wk * (xk[0] * yk[0] + xk[1] * yk[1]);
            b += wk * (xk[2] * yk[2] + xk[3] * yk[3]);
        }
        a + b
    }

    /// Field representing the linear functional `g` in this inner product.
    fn riesz(&self, g: &Field) -> Field {
        g.iter()
            .zip(&self.weights)
            .map(|(gk, wk)| gk.map(|v| v / wk))
            .collect()
    }

    fn axpy(alpha: f64, x: &Field, y: &mut Field) {
        for (yk, xk) in y.iter_mut().zip(x) {
            for i in 0..4 {
                yk[i] += alpha * xk[i];
            }
        }
    }

    fn scaled(alpha: f64, x: &Field) -> Field {
        x.iter().map(|xk| xk.map(|v| alpha * v)).collect()
    }

    fn diff(x: &Field, y: &Field) -> Field {
        x.iter()
            .zip(y)
            .map(|(xk, yk)| std::array::from_fn(|i| xk[i] - yk[i]))
            .collect()
    }
}

/// Limited-memory inverse Hessian by the two-loop recursion.
struct CurvatureMemory {
    capacity: usize,
    pairs: VecDeque<(Field, Field, f64)>,
}

impl CurvatureMemory {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            pairs: VecDeque::new(),
        }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn push(&mut self, space: &ControlSpace, s: Field, y: Field) {
        if self.capacity == 0 {
            return;
        }
        let sy = space.dot(&s, &y);
        if !(sy > 1e-12 * (space.dot(&s, &s) * space.dot(&y, &y)).sqrt()) {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    /// `-H g`.
    fn direction(&self, space: &ControlSpace, g: &Field) -> Field {
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * space.dot(s, &q);
            ControlSpace::axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            q = ControlSpace::scaled(space.dot(s, y) / space.dot(y, y), &q);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * space.dot(y, &q);
            ControlSpace::axpy(a - b, s, &mut q);
        }
        ControlSpace::scaled(-1.0, &q)
    }
}

struct SweepPoint {
    controls: ControlTrajectory,
    states: StateTrajectory,
    costates: CostateTrajectory,
    cost: f64,
    /// Gradient of the discretized objective as a field in the weighted product.
    gradient: Field,
    /// Nodal `dH/du` from the backward-integrated costate.
    residual: Field,
}

impl SweepPoint {
    fn evaluate(
        controls: ControlTrajectory,
        space: &ControlSpace,
        bc: &BoundaryConditions,
        w: &Weights,
        pen: &TerminalPenalty,
    ) -> Result<Self> {
        let (states, costates) = sweep(&controls, bc, w, pen)?;
        let cost = augmented_cost(&states, &controls, w, pen)?;
        let gradient = space.riesz(&discrete_gradient(&controls, &states, w, pen)?);
        let residual = stationarity_profile(&states, &costates, &controls, w);
        Ok(Self {
            controls,
            states,
            costates,
            cost,
            gradient,
            residual,
        })
    }

    fn stationarity(&self) -> f64 {
        inf_norm4(&self.residual)
    }
}

/// Objective at a trial control, `None` when its trajectory trips the
/// separation guard or overflows.
fn trial_cost(
    trial: &ControlTrajectory,
    bc: &BoundaryConditions,
    w: &Weights,
    pen: &TerminalPenalty,
) -> Result<Option<f64>> {
    let states = match integrate_forward(&bc.initial, trial, trial.grid()) {
        Ok(s) => s,
        Err(Error::SeparationTooSmall { .. } | Error::NonFiniteStage { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    match augmented_cost(&states, trial, w, pen) {
        Ok(c) if c.is_finite() => Ok(Some(c)),
        Ok(_) | Err(Error::SeparationTooSmall { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn moved(u: &ControlTrajectory, step: f64, d: &Field) -> ControlTrajectory {
    let mut trial = u.clone();
    for (c, dk) in trial.nodes_mut().iter_mut().zip(d) {
        let mut a = c.to_array();
        for i in 0..4 {
            a[i] += step * dk[i];
        }
        *c = ControlPair::from_array(a);
    }
    trial
}

const MAX_BACKTRACKS: usize = 60;

/// Flat steps in a row that count as stagnation at a penalty level.
const FLAT_STEPS: usize = 3;

/// Target of the final Newton solve on `|(dH/du, state(T) - target)|_inf`,
/// relative to `gradient_tolerance`.
const POLISH_FACTOR: f64 = 1e-4;

/// Newton steps allowed in the final solve.
const NEWTON_STEPS: usize = 12;

/// Forward-backward sweep from [`initial_controls`].
pub fn fbsm_solve(
    bc: &BoundaryConditions,
    w: &Weights,
    grid: TimeGrid,
    opts: &SolveOptions,
) -> Result<Solution> {
    fbsm_from(bc, w, initial_controls(bc, grid), opts)
}

/// Forward-backward sweep from a caller-provided control guess.
///
/// Each stage runs quasi-Newton descent on the penalized objective with its
/// exact discrete gradient and an Armijo line search. Between stages the
/// terminal multipliers of each vehicle off target are updated, and its weight
/// grows when its mismatch fell by less than a factor four. Once both vehicles
/// are within `terminal_tolerance`, a Newton-Krylov solve of the nodal
/// stationarity conditions and the terminal conditions, with the multipliers
/// as extra unknowns, finishes the solve. Only the descent iterates enter
/// `cost_history`.
pub fn fbsm_from(
    bc: &BoundaryConditions,
    w: &Weights,
    guess: ControlTrajectory,
    opts: &SolveOptions,
) -> Result<Solution> {
    check_inputs(bc, w, guess.grid(), opts)?;
    let space = ControlSpace {
        weights: guess.grid().trapezoid_weights(),
    };
    let mut pen = TerminalPenalty::uniform(opts.penalty.initial, bc.terminal);
    let mut point = SweepPoint::evaluate(guess, &space, bc, w, &pen)?;
    let mut memory = CurvatureMemory::new(opts.memory);
    let mut stage = 0;
    let mut history = vec![CostRecord {
        stage,
        penalty_weights: pen.weights,
        augmented_cost: point.cost,
    }];
    let mut iterations = 0;
    // Consecutive accepted steps with relative decrease below `cost_tolerance`.
    let mut flat_steps = 0;
    let mut previous_mismatch = [f64::INFINITY; 2];
    let mut out_of_budget = false;

    loop {
        let g_inf = inf_norm4(&point.gradient);
        let settled = g_inf <= opts.gradient_tolerance || flat_steps >= FLAT_STEPS;
        if !settled {
            if iterations >= opts.max_iterations {
                out_of_budget = true;
                break;
            }
            iterations += 1;
            let g = &point.gradient;
            let g_norm = space.dot(g, g).sqrt();
            let mut d = memory.direction(&space, g);
            let mut slope = space.dot(g, &d);
            let fresh = memory.is_empty() || !(slope < 0.0);
            if fresh {
                memory.clear();
                d = ControlSpace::scaled(-1.0, g);
                slope = -g_norm * g_norm;
            }
            let mut step = if fresh {
                opts.initial_step / (1.0 + g_norm)
            } else {
                1.0
            };

            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial = moved(&point.controls, step, &d);
                if let Some(cost) = trial_cost(&trial, bc, w, &pen)? {
                    if cost <= point.cost + opts.armijo_slope * step * slope {
                        accepted = Some(trial);
                        break;
                    }
                }
                step *= opts.backtrack_factor;
            }

            match accepted {
                Some(trial) => {
                    let next = SweepPoint::evaluate(trial, &space, bc, w, &pen)?;
                    let decrease =
                        (point.cost - next.cost) / point.cost.abs().max(f64::MIN_POSITIVE);
                    flat_steps = if decrease <= opts.cost_tolerance {
                        flat_steps + 1
                    } else {
                        0
                    };
                    let s = ControlSpace::scaled(step, &d);
                    let y = ControlSpace::diff(&next.gradient, &point.gradient);
                    memory.push(&space, s, y);
                    point = next;
                    history.push(CostRecord {
                        stage,
                        penalty_weights: pen.weights,
                        augmented_cost: point.cost,
                    });
                    continue;
                }
                None if !memory.is_empty() => {
                    memory.clear();
                    continue;
                }
                None => {}
            }
        }

        // Descent has settled for the current terminal term.
        let residual = terminal_residual(&point.states, &bc.terminal);
        let mut updated = false;
        for v in 0..2 {
            let mismatch = residual[3 * v..3 * v + 3]
                .iter()
                .fold(0.0_f64, |m, r| m.max(r.abs()));
            if mismatch > opts.terminal_tolerance {
                pen.update_multipliers(v, &point.states.last().clone());
                if mismatch > 0.25 * previous_mismatch[v] {
                    pen.weights[v] = (pen.weights[v] * opts.penalty.growth).min(opts.penalty.max);
                }
                updated = true;
            }
            previous_mismatch[v] = mismatch;
        }
        if !updated {
            break;
        }
        stage += 1;
        memory.clear();
        flat_steps = 0;
        point = SweepPoint::evaluate(point.controls, &space, bc, w, &pen)?;
        history.push(CostRecord {
            stage,
            penalty_weights: pen.weights,
            augmented_cost: point.cost,
        });
    }

    if !out_of_budget {
        if let Some((controls, finished)) =
            newton_finish(&point.controls, pen, bc, w, opts, &mut iterations)?
        {
            pen = finished;
            point = SweepPoint::evaluate(controls, &space, bc, w, &pen)?;
        }
    }

    let within = terminal_residual(&point.states, &bc.terminal)
        .iter()
        .all(|r| r.abs() <= opts.terminal_tolerance);
    let stationary = point.stationarity() <= opts.gradient_tolerance;
    let converged = within && stationary;
    let stop_reason = if converged {
        "converged"
    } else if out_of_budget {
        "iteration limit"
    } else if !within {
        "terminal residual above tolerance"
    } else {
        "stationarity above the gradient tolerance"
    }
    .to_string();

    let max_stationarity = point.stationarity();
    let SweepPoint {
        controls,
        states,
        costates,
        cost,
        ..
    } = point;
    let report = SolveReport {
        method: Method::Fbsm,
        converged,
        iterations,
        final_cost: total_cost(&states, &controls, w)?,
        augmented_cost: cost,
        penalty_weights: pen.weights,
        terminal_residual: terminal_residual(&states, &bc.terminal),
        max_stationarity,
        hamiltonian_drift: hamiltonian_drift(&states, &costates, &controls, w)?,
        min_separation: min_separation(&states),
        cost_history: history,
        stop_reason,
    };
    Ok(Solution {
        states,
        costates,
        controls,
        report,
    })
}

/// Unknowns of the final solve: nodal controls followed by the multipliers.
fn pack(u: &ControlTrajectory, pen: &TerminalPenalty) -> Vec<f64> {
    let mut x: Vec<f64> = u.nodes().iter().flat_map(|c| c.to_array()).collect();
    x.extend_from_slice(&pen.multipliers);
    x
}

fn unpack(
    x: &[f64],
    u: &ControlTrajectory,
    pen: &TerminalPenalty,
) -> (ControlTrajectory, TerminalPenalty) {
    let mut controls = u.clone();
    for (c, chunk) in controls.nodes_mut().iter_mut().zip(x.chunks_exact(4)) {
        *c = ControlPair::from_array([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
    let mut pen = *pen;
    let n = x.len() - 6;
    pen.multipliers.copy_from_slice(&x[n..]);
    (controls, pen)
}

/// Nodal `dH/du` followed by `state(T) - target`; `None` on collision.
fn optimality_residual(
    x: &[f64],
    u: &ControlTrajectory,
    pen: &TerminalPenalty,
    bc: &BoundaryConditions,
    w: &Weights,
) -> Result<Option<Vec<f64>>> {
    let (controls, pen) = unpack(x, u, pen);
    let (states, costates) = match sweep(&controls, bc, w, &pen) {
        Ok(sc) => sc,
        Err(Error::SeparationTooSmall { .. } | Error::NonFiniteStage { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let mut f: Vec<f64> = stationarity_profile(&states, &costates, &controls, w)
        .into_iter()
        .flatten()
        .collect();
    f.extend_from_slice(&terminal_residual(&states, &bc.terminal));
    Ok(f.iter().all(|v| v.is_finite()).then_some(f))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton-Krylov solve of the stationarity and terminal conditions. Returns
/// the controls and terminal term of the best point found when it improves on
/// the start.
fn newton_finish(
    u: &ControlTrajectory,
    pen: TerminalPenalty,
    bc: &BoundaryConditions,
    w: &Weights,
    opts: &SolveOptions,
    iterations: &mut usize,
) -> Result<Option<(ControlTrajectory, TerminalPenalty)>> {
    let target = POLISH_FACTOR * opts.gradient_tolerance;
    let mut x = pack(u, &pen);
    let Some(mut f) = optimality_residual(&x, u, &pen, bc, w)? else {
        return Ok(None);
    };
    let mut improved = false;
    for _ in 0..NEWTON_STEPS {
        if norm_inf(&f) <= target || *iterations >= opts.max_iterations {
            break;
        }
        *iterations += 1;
        let base = f.clone();
        let xs = x.clone();
        let jv = |v: &[f64]| -> Result<Option<Vec<f64>>> {
            let vn = norm2(v);
            if vn == 0.0 {
                return Ok(Some(vec![0.0; v.len()]));
            }
            let eps = 1e-7 * (1.0 + norm2(&xs) / (xs.len() as f64).sqrt()) / vn;
            let shifted: Vec<f64> = xs.iter().zip(v).map(|(a, b)| a + eps * b).collect();
            Ok(optimality_residual(&shifted, u, &pen, bc, w)?
                .map(|fs| fs.iter().zip(&base).map(|(a, b)| (a - b) / eps).collect()))
        };
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let Some(d) = gmres(jv, &rhs, GMRES_TOLERANCE, GMRES_RESTART, GMRES_CYCLES)? else {
            break;
        };
        let norm = norm2(&f);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            if let Some(ft) = optimality_residual(&trial, u, &pen, bc, w)? {
                if norm2(&ft) < (1.0 - 1e-4 * step) * norm {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            step *= opts.backtrack_factor;
        }
        match accepted {
            Some((xn, fnew)) => {
                x = xn;
                f = fnew;
                improved = true;
            }
            None => break,
        }
    }
    Ok(improved.then(|| unpack(&x, u, &pen)))
}

const GMRES_TOLERANCE: f64 = 1e-6;
const GMRES_RESTART: usize = 60;
const GMRES_CYCLES: usize = 4;

/// Restarted GMRES for `A d = b` with `A` given by products. Returns `None`
/// when a product fails.
fn gmres<F>(
    mut apply: F,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    cycles: usize,
) -> Result<Option<Vec<f64>>>
where
    F: FnMut(&[f64]) -> Result<Option<Vec<f64>>>,
{
    let n = b.len();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(Some(x));
    }
    for _ in 0..cycles {
        let r: Vec<f64> = if x.iter().all(|v| *v == 0.0) {
            b.to_vec()
        } else {
            let Some(ax) = apply(&x)? else {
                return Ok(None);
            };
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        let beta = norm2(&r);
        if beta <= rel_tol * b_norm {
            break;
        }
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        for j in 0..restart {
            let Some(mut wv) = apply(&basis[j])? else {
                return Ok(None);
            };
            let mut col = vec![0.0; j + 2];
            for (i, q) in basis.iter().enumerate() {
                let hij: f64 = wv.iter().zip(q).map(|(a, b)| a * b).sum();
                col[i] = hij;
                for (wk, qk) in wv.iter_mut().zip(q) {
                    *wk -= hij * qk;
                }
            }
            let h_next = norm2(&wv);
            col[j + 1] = h_next;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let denom = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / denom, col[j + 1] / denom)
            };
            col[j] = denom;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(col);
            let done = g[j + 1].abs() <= rel_tol * b_norm || h_next == 0.0;
            if !done {
                basis.push(wv.iter().map(|v| v / h_next).collect());
            }
            if done || j + 1 == restart {
                // Back substitution on the triangular factor.
                let m = hess.len();
                let mut y = vec![0.0; m];
                for i in (0..m).rev() {
                    let mut acc = g[i];
                    for k in i + 1..m {
                        acc -= hess[k][i] * y[k];
                    }
                    y[i] = acc / hess[i][i];
                }
                for (k, yk) in y.iter().enumerate() {
                    for (xi, qi) in x.iter_mut().zip(&basis[k]) {
                        *xi += yk * qi;
                    }
                }
                break;
            }
        }
        if g.last().is_some_and(|v| v.abs() <= rel_tol * b_norm) {
            break;
        }
    }
    Ok(Some(x))
}
