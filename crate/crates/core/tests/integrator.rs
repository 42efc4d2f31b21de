use dubins_pair::integrate::{
    integrate_backward, integrate_extremal, integrate_forward, rk4_step, total_cost,
};
use dubins_pair::pmp::adjoint_rhs;
use dubins_pair::{
    ControlPair, ControlTrajectory, Costate, ExtendedState, PairState, Result, TimeGrid,
    VehicleState, Weights,
};

fn smooth_controls(grid: TimeGrid) -> ControlTrajectory {
    let nodes = grid
        .times()
        .map(|t| {
            ControlPair::new(
                0.8 + 0.3 * t,
                (1.7 * t).sin(),
                0.5 - 0.2 * t,
                0.4 * (0.9 * t).cos(),
            )
        })
        .collect();
    ControlTrajectory::new(grid, nodes).unwrap()
}

fn start() -> PairState {
    PairState::new(
        VehicleState::new(0.0, 0.0, 0.3),
        VehicleState::new(3.0, 1.0, -0.5),
    )
}

fn weights() -> Weights {
    Weights {
        delta: 1.0,
        beta: 0.3,
        alpha: 0.2,
        rho: 0.7,
    }
}

#[test]
fn exponential_step() {
    let x = rk4_step(|_, y: &[f64; 1]| Ok([y[0]]), &[1.0], 0.0, 0.1).unwrap();
    let hand = 1.0 + (0.1 / 6.0) * (1.0 + 2.0 * 1.05 + 2.0 * 1.0525 + 1.10525);
    assert!((x[0] - hand).abs() < 1e-15);
    assert!((x[0] - 0.1f64.exp()).abs() < 1e-7);
}

#[test]
fn rk4_global_order() {
    let error = |n: usize| -> f64 {
        let h = 1.0 / n as f64;
        let mut x = [1.0];
        for k in 0..n {
            x = rk4_step(|_, y: &[f64; 1]| Ok([y[0]]), &x, k as f64 * h, h).unwrap();
        }
        (x[0] - 1f64.exp()).abs()
    };
    for n in [5, 10, 20] {
        let ratio = error(n) / error(2 * n);
        assert!((12.0..=20.0).contains(&ratio), "N={n}: ratio {ratio}");
    }
}

#[test]
fn circular_arc() {
    let (s, omega, heading) = (1.3, 2.1, 0.4);
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let init = PairState::new(
        VehicleState::new(0.5, -0.2, heading),
        VehicleState::new(10.0, 0.0, 0.0),
    );
    let u = ControlTrajectory::constant(grid, ControlPair::new(s, omega, 0.0, 0.0));
    let end = *integrate_forward(&init, &u, &grid).unwrap().last();
    let turn = heading + omega;
    let x1 = 0.5 + (s / omega) * (heading.cos() - turn.cos());
    let x2 = -0.2 + (s / omega) * (turn.sin() - heading.sin());
    assert!((end.a.pos1 - x1).abs() < 1e-6);
    assert!((end.a.pos2 - x2).abs() < 1e-6);
    assert!((end.a.heading - turn).abs() < 1e-12);
    assert_eq!(end.b, init.b);
}

#[test]
fn zero_control_keeps_state() {
    let grid = TimeGrid::new(2.0, 50).unwrap();
    let u = ControlTrajectory::constant(grid, ControlPair::ZERO);
    let states = integrate_forward(&start(), &u, &grid).unwrap();
    assert!(states.nodes().iter().all(|s| *s == start()));
}

#[test]
fn backward_round_trip() -> Result<()> {
    let grid = TimeGrid::new(2.0, 1000)?;
    let u = smooth_controls(grid);
    let w = weights();
    let states = integrate_forward(&start(), &u, &grid)?;
    let terminal = Costate([0.3, -1.2, 0.5, 0.8, 0.1, -0.4]);
    let costates = integrate_backward(&terminal, &states, &u, &grid, &w)?;
    let h = grid.step_size();
    let mut p = costates.first().0;
    for k in 0..grid.steps() {
        let rhs = |t: f64, y: &[f64; 6]| {
            adjoint_rhs(
                &states.on_segment(k, t),
                &Costate(*y),
                &u.on_segment(k, t),
                &w,
            )
        };
        p = rk4_step(rhs, &p, grid.time(k), h)?;
    }
    for i in 0..6 {
        assert!(
            (p[i] - terminal.0[i]).abs() < 1e-8,
            "component {i}: {} vs {}",
            p[i],
            terminal.0[i]
        );
    }
    Ok(())
}

#[test]
fn backward_zero_field() -> Result<()> {
    let grid = TimeGrid::new(1.0, 40)?;
    let u = smooth_controls(grid);
    let w = Weights {
        beta: 0.0,
        alpha: 0.0,
        rho: 0.0,
        ..weights()
    };
    let states = integrate_forward(&start(), &u, &grid)?;
    let costates = integrate_backward(&Costate::ZERO, &states, &u, &grid, &w)?;
    assert!(costates.nodes().iter().all(|p| *p == Costate::ZERO));
    Ok(())
}

#[test]
fn backward_swap_equivariance() -> Result<()> {
    let grid = TimeGrid::new(2.0, 400)?;
    let u = smooth_controls(grid);
    let w = weights();
    let states = integrate_forward(&start(), &u, &grid)?;
    let terminal = Costate([0.3, -1.2, 0.5, 0.8, 0.1, -0.4]);
    let costates = integrate_backward(&terminal, &states, &u, &grid, &w)?;

    let us = ControlTrajectory::new(grid, u.nodes().iter().map(|c| c.swapped()).collect())?;
    let ss = integrate_forward(&start().swapped(), &us, &grid)?;
    let ps = integrate_backward(&terminal.swapped(), &ss, &us, &grid, &w.swapped())?;
    for (p, q) in costates.nodes().iter().zip(ps.nodes()) {
        let p = p.swapped();
        for i in 0..6 {
            assert!((p.0[i] - q.0[i]).abs() < 1e-12);
        }
    }
    Ok(())
}

#[test]
fn extremal_with_zero_costate_and_no_state_cost_is_constant() -> Result<()> {
    let grid = TimeGrid::new(1.0, 20)?;
    let w = Weights {
        beta: 0.0,
        alpha: 0.0,
        rho: 0.0,
        ..weights()
    };
    let ext = ExtendedState {
        state: start(),
        costate: Costate::ZERO,
    };
    let (states, costates) = integrate_extremal(&ext, &grid, &w)?;
    assert!(states.nodes().iter().all(|s| *s == start()));
    assert!(costates.nodes().iter().all(|p| *p == Costate::ZERO));
    Ok(())
}

fn ramp_cost(steps: usize) -> f64 {
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let nodes = grid
        .times()
        .map(|t| ControlPair::new(t, 0.0, 0.0, 0.0))
        .collect();
    let u = ControlTrajectory::new(grid, nodes).unwrap();
    let init = PairState::new(
        VehicleState::new(0.0, 0.0, 0.0),
        VehicleState::new(5.0, 0.0, 0.0),
    );
    let w = Weights {
        delta: 1.0,
        beta: 0.0,
        alpha: 0.0,
        rho: 0.0,
    };
    let states = integrate_forward(&init, &u, &grid).unwrap();
    total_cost(&states, &u, &w).unwrap()
}

#[test]
fn quadratic_integrand() {
    assert!((ramp_cost(1000) - 1.0 / 6.0).abs() < 1e-5);
}

#[test]
fn trapezoid_refinement_is_second_order() {
    let exact = 1.0 / 6.0;
    let ratio = (ramp_cost(100) - exact) / (ramp_cost(200) - exact);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");

    let grid = |n| TimeGrid::new(2.0, n).unwrap();
    let cost = |n: usize| {
        let g = grid(n);
        let u = smooth_controls(g);
        total_cost(
            &integrate_forward(&start(), &u, &g).unwrap(),
            &u,
            &weights(),
        )
        .unwrap()
    };
    let (c1, c2, c4) = (cost(50), cost(100), cost(200));
    let ratio = (c1 - c2) / (c2 - c4);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn constant_state_cost_is_exact() {
    let grid = TimeGrid::new(2.0, 7).unwrap();
    let s = PairState::new(
        VehicleState::new(1.0, 0.0, 0.0),
        VehicleState::new(0.0, 0.0, 0.0),
    );
    let u = ControlTrajectory::constant(grid, ControlPair::ZERO);
    let w = weights();
    let j = total_cost(&integrate_forward(&s, &u, &grid).unwrap(), &u, &w).unwrap();
    assert!((j - (w.beta + w.rho)).abs() < 1e-14);
}
