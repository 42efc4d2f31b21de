use std::fs;
use std::path::Path;

use dubins_pair::solver::{
    adjoint_gradient, compare_gradients, fd_cost_gradient, initial_controls, GradientAgreement,
};
use dubins_pair::{
    check_suite, isolate_vehicle, solve, Error, Method, Solution, TerminalPenalty, TimeGrid,
    Vehicle,
};

use crate::output::{cost_history_csv, num, plot_svg, summary, trajectory_csv, SWEEP_COLUMNS};
use crate::scenario::{Problem, ScenarioFile};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Exit {
    Converged = 0,
    InputError = 1,
    NotConverged = 2,
    CheckFailed = 3,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }
}

/// Largest grid on which `check` runs the finite-difference gradient oracle.
pub const ORACLE_MAX_STEPS: usize = 500;
pub const GRADIENT_MIN_COSINE: f64 = 0.999;
pub const GRADIENT_MAX_REL_L2: f64 = 5e-3;
/// Bound on the terminal residual of a penalized sweep.
pub const SWEEP_TERMINAL_BOUND: f64 = 1e-2;
pub const DRIFT_BOUND: f64 = 1e-6;
pub const DECOUPLING_BOUND: f64 = 1e-8;

pub struct Run {
    pub solution: Solution,
    /// The sweep stage of a combined run.
    pub sweep: Option<Solution>,
}

pub fn run_problem(problem: &Problem) -> Result<Run, Error> {
    let (solution, sweep) = solve(
        &problem.bc,
        &problem.weights,
        problem.grid,
        &problem.options,
    )?;
    Ok(Run { solution, sweep })
}

pub fn write_artifacts(
    dir: &Path,
    scenario: &ScenarioFile,
    problem: &Problem,
    run: &Run,
) -> std::io::Result<()> {
    let io = |e: Error| std::io::Error::other(e.to_string());
    fs::create_dir_all(dir)?;
    let report = &run.solution.report;
    fs::write(
        dir.join("trajectory.csv"),
        trajectory_csv(&run.solution, &problem.weights).map_err(io)?,
    )?;
    let sweep = run.sweep.as_ref().map(|s| &s.report);
    fs::write(
        dir.join("summary.txt"),
        summary(report, sweep, &scenario.sha256()),
    )?;
    let history = sweep.unwrap_or(report);
    fs::write(dir.join("cost_history.csv"), cost_history_csv(history))?;
    fs::write(dir.join("plot.svg"), plot_svg(&run.solution, &problem.bc))?;
    Ok(())
}

fn solve_and_write(scenario: &ScenarioFile, out: Option<&Path>) -> Result<Run, Exit> {
    let problem = scenario.problem();
    let run = run_problem(&problem).map_err(|e| {
        eprintln!("error: solve failed: {e}");
        Exit::NotConverged
    })?;
    if let Some(dir) = out {
        write_artifacts(dir, scenario, &problem, &run).map_err(|e| {
            eprintln!("error: cannot write artifacts to {}: {e}", dir.display());
            Exit::InputError
        })?;
    }
    Ok(run)
}

fn print_report(run: &Run) {
    let r = &run.solution.report;
    println!(
        "{}: converged={} iterations={} cost={} residual={:.3e} stationarity={:.3e} min_sep={:.4} ({})",
        r.method,
        r.converged,
        r.iterations,
        num(r.final_cost),
        r.terminal_residual_norm(),
        r.max_stationarity,
        r.min_separation,
        r.stop_reason
    );
}

pub fn run_solve(scenario: &ScenarioFile, out: &Path) -> Exit {
    match solve_and_write(scenario, Some(out)) {
        Ok(run) => {
            print_report(&run);
            if run.solution.report.converged {
                Exit::Converged
            } else {
                Exit::NotConverged
            }
        }
        Err(code) => code,
    }
}

/// One row of the `check` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn row(name: &'static str, passed: bool, detail: String) -> CheckRow {
    CheckRow {
        name,
        passed,
        detail,
    }
}

/// Gradient oracle on the scenario coarsened to at most [`ORACLE_MAX_STEPS`]
/// steps, at the sweep's starting controls and first penalty weight.
pub fn gradient_oracle(problem: &Problem, corrupt: bool) -> Result<GradientAgreement, Error> {
    let steps = problem.grid.steps().min(ORACLE_MAX_STEPS);
    let grid = TimeGrid::new(problem.grid.horizon(), steps)?;
    let u = initial_controls(&problem.bc, grid);
    let pen = TerminalPenalty::uniform(problem.options.penalty.initial, problem.bc.terminal);
    let mut adjoint = adjoint_gradient(&u, &problem.bc, &problem.weights, &pen)?;
    if corrupt {
        for g in adjoint.iter_mut().step_by(2) {
            *g = g.map(|v| -v);
        }
    }
    let fd = fd_cost_gradient(&u, &problem.bc, &problem.weights, &pen)?;
    Ok(compare_gradients(&adjoint, &fd))
}

/// Largest nodal control difference between the pair solve and the two
/// single-vehicle solves.
pub fn decoupling_gap(problem: &Problem, pair: &Solution) -> Result<f64, Error> {
    let mut gap: f64 = 0.0;
    for (vehicle, lanes) in [(Vehicle::A, 0..2), (Vehicle::B, 2..4)] {
        let (bc, w) = isolate_vehicle(&problem.bc, &problem.weights, vehicle);
        let (single, _) = solve(&bc, &w, problem.grid, &problem.options)?;
        for (p, s) in pair.controls.nodes().iter().zip(single.controls.nodes()) {
            let (p, s) = (p.to_array(), s.to_array());
            for i in lanes.clone() {
                gap = gap.max((p[i] - s[i]).abs());
            }
        }
    }
    Ok(gap)
}

pub fn check_rows(problem: &Problem, run: &Run, corrupt_gradient: bool) -> Vec<CheckRow> {
    let sol = &run.solution;
    let r = &sol.report;
    let opts = &problem.options;
    let mut rows = vec![row("converged", r.converged, r.stop_reason.clone())];

    let (bound, extremal) = match r.method {
        Method::Fbsm => (SWEEP_TERMINAL_BOUND, false),
        Method::Shooting | Method::Both => (opts.residual_tolerance, true),
    };
    let res = r.terminal_residual_norm();
    rows.push(row(
        "terminal_residual",
        res < bound,
        format!("{res:.3e} < {bound:.0e}"),
    ));
    rows.push(row(
        "stationarity",
        r.max_stationarity <= opts.gradient_tolerance,
        format!(
            "{:.3e} <= {:.0e}",
            r.max_stationarity, opts.gradient_tolerance
        ),
    ));
    rows.push(row(
        "min_separation",
        r.min_separation > 0.0,
        format!("{:.6} > 0", r.min_separation),
    ));
    if extremal {
        rows.push(row(
            "hamiltonian_drift",
            r.hamiltonian_drift < DRIFT_BOUND,
            format!("{:.3e} < {DRIFT_BOUND:.0e}", r.hamiltonian_drift),
        ));
    }
    match check_suite(sol, &problem.bc, &problem.weights) {
        Ok(d) => {
            let same = d.final_cost == r.final_cost
                && d.terminal_residual == r.terminal_residual
                && d.max_stationarity == r.max_stationarity
                && d.hamiltonian_drift == r.hamiltonian_drift
                && d.min_separation == r.min_separation;
            rows.push(row(
                "report_consistency",
                same,
                "recomputed diagnostics equal the report".into(),
            ));
        }
        Err(e) => rows.push(row("report_consistency", false, e.to_string())),
    }
    match gradient_oracle(problem, corrupt_gradient) {
        Ok(g) => rows.push(row(
            "gradient_oracle",
            g.cosine > GRADIENT_MIN_COSINE && g.relative_l2 < GRADIENT_MAX_REL_L2,
            format!(
                "cosine {:.9} > {GRADIENT_MIN_COSINE}, rel-L2 {:.3e} < {GRADIENT_MAX_REL_L2:.0e}",
                g.cosine, g.relative_l2
            ),
        )),
        Err(e) => rows.push(row("gradient_oracle", false, e.to_string())),
    }
    if problem.weights.rho == 0.0 {
        match decoupling_gap(problem, sol) {
            Ok(gap) => rows.push(row(
                "decoupling",
                gap <= DECOUPLING_BOUND,
                format!("{gap:.3e} <= {DECOUPLING_BOUND:.0e}"),
            )),
            Err(e) => rows.push(row("decoupling", false, e.to_string())),
        }
    }
    rows
}

pub fn run_check(scenario: &ScenarioFile, out: Option<&Path>, corrupt_gradient: bool) -> Exit {
    let run = match solve_and_write(scenario, out) {
        Ok(run) => run,
        Err(code) => return code,
    };
    print_report(&run);
    let rows = check_rows(&scenario.problem(), &run, corrupt_gradient);
    for r in &rows {
        println!(
            "{:<20} {}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    if rows.iter().all(|r| r.passed) {
        Exit::Converged
    } else {
        Exit::CheckFailed
    }
}

/// Parses a comma-separated list of reals.
pub fn parse_values(list: &str) -> Result<Vec<f64>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| format!("'{s}' is not a number"))
        })
        .collect()
}

pub fn point_dir(param: &str, value: f64) -> String {
    format!("{param}_{}", num(value))
}

pub fn run_sweep(scenario: &ScenarioFile, param: &str, values: &[f64], out: &Path) -> Exit {
    if values.is_empty() {
        eprintln!("error: --values is empty");
        return Exit::InputError;
    }
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        let mut s = scenario.clone();
        if let Err(e) = s.set_param(param, v) {
            eprintln!("error: {e}");
            return Exit::InputError;
        }
        points.push((v, s));
    }
    if let Err(e) = fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return Exit::InputError;
    }
    let mut table = SWEEP_COLUMNS.join(",");
    table.push('\n');
    let mut all_converged = true;
    for (v, s) in &points {
        println!("{param} = {}", num(*v));
        let violations = s.violations();
        let run = if violations.is_empty() {
            solve_and_write(s, Some(&out.join(point_dir(param, *v))))
        } else {
            for m in &violations {
                eprintln!("  invalid point: {m}");
            }
            Err(Exit::InputError)
        };
        let line = match &run {
            Ok(run) => {
                print_report(run);
                let r = &run.solution.report;
                all_converged &= r.converged;
                format!(
                    "{},{},{},{},{},{}",
                    num(*v),
                    num(r.final_cost),
                    num(r.min_separation),
                    num(r.terminal_residual_norm()),
                    r.iterations,
                    r.converged
                )
            }
            Err(_) => {
                all_converged = false;
                format!("{},NaN,NaN,NaN,0,false", num(*v))
            }
        };
        table.push_str(&line);
        table.push('\n');
    }
    if let Err(e) = fs::write(out.join("sweep.csv"), table) {
        eprintln!("error: cannot write sweep.csv: {e}");
        return Exit::InputError;
    }
    if all_converged {
        Exit::Converged
    } else {
        Exit::NotConverged
    }
}
