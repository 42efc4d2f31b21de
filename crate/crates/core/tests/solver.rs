use dubins_pair::solver::{
    adjoint_gradient, check_suite, fd_cost_gradient, initial_controls, stationarity_profile, sweep,
    TerminalPenalty,
};
use dubins_pair::{
    fbsm_solve, shooting_solve, solve, BoundaryConditions, ControlPair, ControlTrajectory, Costate,
    Error, Method, PairState, SolveOptions, TimeGrid, VehicleState, Weights,
};

fn small() -> (BoundaryConditions, Weights, TimeGrid) {
    let bc = BoundaryConditions {
        initial: PairState::new(
            VehicleState::new(0.0, 0.0, 0.0),
            VehicleState::new(3.0, 0.0, 0.0),
        ),
        terminal: PairState::new(
            VehicleState::new(0.5, 1.5, 0.3),
            VehicleState::new(2.5, 1.0, -0.2),
        ),
        horizon: 2.0,
    };
    (bc, Weights::default(), TimeGrid::new(2.0, 200).unwrap())
}

#[test]
fn shooting_at_rest() {
    let s = PairState::new(
        VehicleState::new(1.0, 0.0, 0.5),
        VehicleState::new(-1.0, 2.0, 0.0),
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
    let sol = shooting_solve(
        &bc,
        &w,
        TimeGrid::new(1.0, 50).unwrap(),
        &SolveOptions::default(),
        None,
    )
    .unwrap();
    assert!(sol.report.converged);
    assert_eq!(*sol.costates.first(), Costate::ZERO);
    assert!(sol
        .controls
        .nodes()
        .iter()
        .all(|c| c.to_array().iter().all(|v| *v == 0.0)));
    assert_eq!(sol.report.final_cost, 0.0);
}

#[test]
fn fbsm_small_scenario() {
    let (bc, w, grid) = small();
    let sol = fbsm_solve(&bc, &w, grid, &SolveOptions::default()).unwrap();
    let r = &sol.report;
    assert!(r.converged, "{}", r.stop_reason);
    assert!(r.terminal_residual_norm() < 1e-2);
    assert!(r.max_stationarity <= 1e-6);
    assert!(r.min_separation > 0.0);
    assert!(r.iterations <= 500);
}

#[test]
fn accepted_costs_monotone_within_each_stage() {
    let (bc, w, grid) = small();
    let sol = fbsm_solve(&bc, &w, grid, &SolveOptions::default()).unwrap();
    let h = &sol.report.cost_history;
    assert!(!h.is_empty());
    for pair in h.windows(2) {
        assert!(pair[1].stage >= pair[0].stage);
        if pair[1].stage == pair[0].stage {
            assert_eq!(pair[1].penalty_weights, pair[0].penalty_weights);
            assert!(pair[1].augmented_cost <= pair[0].augmented_cost);
        }
    }
}

#[test]
fn check_suite_reproduces_report() {
    let (bc, w, grid) = small();
    for method in [Method::Fbsm, Method::Shooting, Method::Both] {
        let opts = SolveOptions {
            method,
            ..SolveOptions::default()
        };
        let (sol, _) = solve(&bc, &w, grid, &opts).unwrap();
        let d = check_suite(&sol, &bc, &w).unwrap();
        let r = &sol.report;
        assert_eq!(d.final_cost, r.final_cost, "{method}");
        assert_eq!(d.terminal_residual, r.terminal_residual, "{method}");
        assert_eq!(d.max_stationarity, r.max_stationarity, "{method}");
        assert_eq!(d.hamiltonian_drift, r.hamiltonian_drift, "{method}");
        assert_eq!(d.min_separation, r.min_separation, "{method}");
    }
}

#[test]
fn perturbation_raises_stationarity() {
    let (bc, w, grid) = small();
    let mut sol = fbsm_solve(&bc, &w, grid, &SolveOptions::default()).unwrap();
    let before = check_suite(&sol, &bc, &w).unwrap().max_stationarity;
    for (k, c) in sol.controls.nodes_mut().iter_mut().enumerate() {
        c.u1 += 0.05 * (k as f64 * 0.1).sin();
        c.v2 -= 0.02;
    }
    let after = check_suite(&sol, &bc, &w).unwrap().max_stationarity;
    assert!(after > before, "{after} vs {before}");
}

#[test]
fn solves_are_bitwise_deterministic() {
    let (bc, w, grid) = small();
    let opts = SolveOptions {
        method: Method::Both,
        ..SolveOptions::default()
    };
    let (a, sa) = solve(&bc, &w, grid, &opts).unwrap();
    let (b, sb) = solve(&bc, &w, grid, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
}

#[test]
fn adjoint_gradient_tracks_finite_differences() {
    let (bc, w, _) = small();
    let grid = TimeGrid::new(2.0, 60).unwrap();
    let u = initial_controls(&bc, grid);
    let pen = TerminalPenalty::uniform(10.0, bc.terminal);
    let a: Vec<f64> = adjoint_gradient(&u, &bc, &w, &pen)
        .unwrap()
        .into_iter()
        .flatten()
        .collect();
    let f: Vec<f64> = fd_cost_gradient(&u, &bc, &w, &pen)
        .unwrap()
        .into_iter()
        .flatten()
        .collect();
    let dot: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nf = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(dot / (na * nf) > 0.999);
}

#[test]
fn sweep_covers_every_node() {
    let (bc, w, grid) = small();
    let u = ControlTrajectory::constant(grid, ControlPair::new(0.5, 0.1, -0.2, 0.0));
    let pen = TerminalPenalty::uniform(1.0, bc.terminal);
    let (states, costates) = sweep(&u, &bc, &w, &pen).unwrap();
    let prof = stationarity_profile(&states, &costates, &u, &w);
    assert_eq!(prof.len(), grid.len());
}

#[test]
fn rejects_bad_inputs() {
    let (bc, w, grid) = small();
    let bad = SolveOptions {
        armijo_slope: 2.0,
        ..SolveOptions::default()
    };
    assert!(matches!(
        fbsm_solve(&bc, &w, grid, &bad),
        Err(Error::OptionsInvalid(_))
    ));
    let w0 = Weights { delta: 0.0, ..w };
    assert!(matches!(
        shooting_solve(&bc, &w0, grid, &SolveOptions::default(), None),
        Err(Error::ScenarioInvalid(_))
    ));
    let other = TimeGrid::new(3.0, 200).unwrap();
    assert!(matches!(
        fbsm_solve(&bc, &w, other, &SolveOptions::default()),
        Err(Error::GridMismatch(_))
    ));
}

#[test]
fn iteration_cap_is_reported_honestly() {
    let (bc, w, grid) = small();
    let opts = SolveOptions {
        max_iterations: 1,
        ..SolveOptions::default()
    };
    let sol = fbsm_solve(&bc, &w, grid, &opts).unwrap();
    assert!(!sol.report.converged);
    assert!(sol.report.iterations <= 1);
}
