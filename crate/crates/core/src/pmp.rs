//! Pontryagin conditions for the pair: Hamiltonian, adjoint field,
//! stationary controls and the closed-loop extremal field.
//!
//! Sign convention: `H = <p, f(x, c)> + P0 * L(x, c)` with `P0 = -1`, so the
//! optimal control maximizes `H` and `p' = -dH/dx`.

use crate::error::Result;
use crate::model::{
    dynamics_rhs, guarded_separation_sq, running_cost, ControlPair, PairState, VehicleState,
    Weights, P0,
};

/// Adjoint variables `p1..p6`, ordered like [`PairState::to_array`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Costate(pub [f64; 6]);

impl Costate {
    pub const ZERO: Costate = Costate([0.0; 6]);

    pub fn a(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn b(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }

    pub fn swapped(self) -> Self {
        let p = self.0;
        Costate([p[3], p[4], p[5], p[0], p[1], p[2]])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// State and costate together: the 12-vector evolved by the extremal field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtendedState {
    pub state: PairState,
    pub costate: Costate,
}

impl ExtendedState {
    pub fn to_array(self) -> [f64; 12] {
        let s = self.state.to_array();
        let p = self.costate.0;
        let mut out = [0.0; 12];
        out[..6].copy_from_slice(&s);
        out[6..].copy_from_slice(&p);
        out
    }

    pub fn from_array(v: [f64; 12]) -> Self {
        let mut s = [0.0; 6];
        let mut p = [0.0; 6];
        s.copy_from_slice(&v[..6]);
        p.copy_from_slice(&v[6..]);
        Self {
            state: PairState::from_array(s),
            costate: Costate(p),
        }
    }
}

fn pairing(p: [f64; 3], s: &VehicleState, speed: f64, turn: f64) -> f64 {
    let (sn, cs) = s.heading.sin_cos();
    (p[0] * sn * speed + p[1] * cs * speed) + p[2] * turn
}

pub fn hamiltonian(
    state: &PairState,
    costate: &Costate,
    control: &ControlPair,
    w: &Weights,
) -> Result<f64> {
    let l = running_cost(state, control, w)?;
    let ha = pairing(costate.a(), &state.a, control.u1, control.u2);
    let hb = pairing(costate.b(), &state.b, control.v1, control.v2);
    Ok((ha + hb) + P0 * l)
}

/// Projection of the position costate onto the heading direction.
fn heading_projection(p: [f64; 3], s: &VehicleState) -> f64 {
    let (sn, cs) = s.heading.sin_cos();
    p[0] * sn + p[1] * cs
}

/// Unique maximizer of the Hamiltonian over controls (requires `delta > 0`).
pub fn optimal_control(state: &PairState, costate: &Costate, w: &Weights) -> ControlPair {
    let scale = -P0 * w.delta;
    let (pa, pb) = (costate.a(), costate.b());
    ControlPair::new(
        heading_projection(pa, &state.a) / scale,
        pa[2] / scale,
        heading_projection(pb, &state.b) / scale,
        pb[2] / scale,
    )
}

/// `dH/d(control)` evaluated at the given control.
pub fn stationarity_residual(
    state: &PairState,
    costate: &Costate,
    control: &ControlPair,
    w: &Weights,
) -> [f64; 4] {
    let (pa, pb) = (costate.a(), costate.b());
    [
        heading_projection(pa, &state.a) + P0 * w.delta * control.u1,
        pa[2] + P0 * w.delta * control.u2,
        heading_projection(pb, &state.b) + P0 * w.delta * control.v1,
        pb[2] + P0 * w.delta * control.v2,
    ]
}

/// `-dH/d(vehicle state)` for one vehicle; `other` is the partner vehicle.
fn vehicle_adjoint(
    p: [f64; 3],
    me: &VehicleState,
    other: &VehicleState,
    attraction: f64,
    rho: f64,
    inv_d4: f64,
    speed: f64,
) -> [f64; 3] {
    let (sn, cs) = me.heading.sin_cos();
    // d/dpos (rho / d^2) = -2 rho (me - other) / d^4; the 1/2 of the cost cancels the 2.
    let dh1 = P0 * (attraction * me.pos1 - rho * (me.pos1 - other.pos1) * inv_d4);
    let dh2 = P0 * (attraction * me.pos2 - rho * (me.pos2 - other.pos2) * inv_d4);
    let dh3 = p[0] * speed * cs - p[1] * speed * sn;
    [-dh1, -dh2, -dh3]
}

/// Costate derivative `p' = -dH/d(state)`.
pub fn adjoint_rhs(
    state: &PairState,
    costate: &Costate,
    control: &ControlPair,
    w: &Weights,
) -> Result<[f64; 6]> {
    let d2 = guarded_separation_sq(state)?;
    let inv_d4 = 1.0 / (d2 * d2);
    let da = vehicle_adjoint(
        costate.a(),
        &state.a,
        &state.b,
        w.beta,
        w.rho,
        inv_d4,
        control.u1,
    );
    let db = vehicle_adjoint(
        costate.b(),
        &state.b,
        &state.a,
        w.alpha,
        w.rho,
        inv_d4,
        control.v1,
    );
    Ok([da[0], da[1], da[2], db[0], db[1], db[2]])
}

/// Extremal field: dynamics and adjoint with the stationary control substituted.
pub fn closed_loop_rhs(ext: &ExtendedState, w: &Weights) -> Result<[f64; 12]> {
    let control = optimal_control(&ext.state, &ext.costate, w);
    let ds = dynamics_rhs(&ext.state, &control);
    let dp = adjoint_rhs(&ext.state, &ext.costate, &control, w)?;
    let mut out = [0.0; 12];
    out[..6].copy_from_slice(&ds);
    out[6..].copy_from_slice(&dp);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VehicleState;

    fn pair(a: [f64; 3], b: [f64; 3]) -> PairState {
        PairState::new(VehicleState::from_array(a), VehicleState::from_array(b))
    }

    #[test]
    fn hamiltonian_examples() {
        let w = Weights {
            delta: 1.0,
            beta: 0.4,
            alpha: 0.2,
            rho: 1.5,
        };
        let s = pair([1.0, 0.0, 0.0], [0.0; 3]);
        let h = hamiltonian(&s, &Costate::ZERO, &ControlPair::ZERO, &w).unwrap();
        assert_eq!(h, -0.5 * (w.beta + w.rho));

        let w = Weights {
            delta: 1.0,
            beta: 0.0,
            alpha: 0.0,
            rho: 0.0,
        };
        let mut p = [0.0; 6];
        p[2] = 2.0;
        let h = hamiltonian(&s, &Costate(p), &ControlPair::new(0.0, 3.0, 0.0, 0.0), &w).unwrap();
        assert_eq!(h, 1.5);
    }

    #[test]
    fn optimal_control_examples() {
        let w = Weights {
            delta: 2.0,
            ..Weights::default()
        };
        let s = pair([0.0, 0.0, 0.0], [4.0, 0.0, 0.3]);
        let c = optimal_control(&s, &Costate([0.0, 3.0, 4.0, 0.0, 0.0, 0.0]), &w);
        assert_eq!(c.u1, 1.5);
        assert_eq!(c.u2, 2.0);
        assert_eq!(optimal_control(&s, &Costate::ZERO, &w), ControlPair::ZERO);
    }

    #[test]
    fn adjoint_examples() {
        let w = Weights {
            delta: 1.0,
            beta: 0.0,
            alpha: 0.0,
            rho: 0.0,
        };
        let s = pair([1.0, 0.0, 0.0], [0.0; 3]);
        let dp = adjoint_rhs(&s, &Costate::ZERO, &ControlPair::ZERO, &w).unwrap();
        assert_eq!(dp, [0.0; 6]);

        let w = Weights { beta: 1.0, ..w };
        let dp = adjoint_rhs(&s, &Costate::ZERO, &ControlPair::ZERO, &w).unwrap();
        assert_eq!(dp, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn closed_loop_examples() {
        let w = Weights {
            delta: 0.5,
            ..Weights::default()
        };
        let s = pair([1.0, 2.0, 0.3], [4.0, -1.0, 1.0]);
        let ext = ExtendedState {
            state: s,
            costate: Costate::ZERO,
        };
        let d = closed_loop_rhs(&ext, &w).unwrap();
        assert_eq!(&d[..6], &[0.0; 6]);

        let ext = ExtendedState {
            state: s,
            costate: Costate([0.0, 0.0, w.delta, 0.0, 0.0, 0.0]),
        };
        let d = closed_loop_rhs(&ext, &w).unwrap();
        assert_eq!(d[2], 1.0);
    }

    #[test]
    fn stationarity_examples() {
        let w = Weights {
            delta: 2.0,
            ..Weights::default()
        };
        let s = pair([1.0, 2.0, 0.3], [4.0, -1.0, 1.0]);
        let r = stationarity_residual(
            &s,
            &Costate::ZERO,
            &ControlPair::new(1.0, 0.0, 0.0, 0.0),
            &w,
        );
        assert_eq!(r, [-2.0, 0.0, 0.0, 0.0]);

        let p = Costate([0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
        let c = optimal_control(&s, &p, &w);
        let r = stationarity_residual(&s, &p, &c, &w);
        assert!(r.iter().all(|v| v.abs() < 1e-15), "{r:?}");
    }
}
