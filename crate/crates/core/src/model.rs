//! Vehicle kinematics and the running cost of the pair.
//!
//! Each vehicle is a Dubins unicycle whose first planar coordinate advances
//! with `sin(heading)` and whose second advances with `cos(heading)`. The two
//! vehicles are coupled only through the repulsion term `rho / d^2` of the
//! running cost.
//!
//! Every pairwise reduction in this module is written as `(vehicle a) +
//! (vehicle b) + coupling`, so swapping the vehicles reproduces results
//! bit-for-bit (floating-point addition of two terms commutes).

use crate::error::{Error, Result};

/// Squared separation below which the repulsion term is treated as a collision.
pub const SEPARATION_GUARD: f64 = 1e-9;

/// Multiplier of the running cost inside the Hamiltonian (normal extremals).
pub const P0: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub pos1: f64,
    pub pos2: f64,
    /// Unwrapped heading in radians.
    pub heading: f64,
}

impl VehicleState {
    pub const fn new(pos1: f64, pos2: f64, heading: f64) -> Self {
        Self {
            pos1,
            pos2,
            heading,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.pos1, self.pos2, self.heading]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Squared distance of the position from the origin.
    pub fn radius_sq(&self) -> f64 {
        self.pos1 * self.pos1 + self.pos2 * self.pos2
    }

    pub fn is_finite(&self) -> bool {
        self.pos1.is_finite() && self.pos2.is_finite() && self.heading.is_finite()
    }
}

/// Configuration of both vehicles; `a` carries the x-symbols, `b` the y-symbols.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairState {
    pub a: VehicleState,
    pub b: VehicleState,
}

impl PairState {
    pub const fn new(a: VehicleState, b: VehicleState) -> Self {
        Self { a, b }
    }

    /// `[x1, x2, x3, y1, y2, y3]`
    pub fn to_array(self) -> [f64; 6] {
        [
            self.a.pos1,
            self.a.pos2,
            self.a.heading,
            self.b.pos1,
            self.b.pos2,
            self.b.heading,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            a: VehicleState::new(v[0], v[1], v[2]),
            b: VehicleState::new(v[3], v[4], v[5]),
        }
    }

    pub fn swapped(self) -> Self {
        Self {
            a: self.b,
            b: self.a,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }
}

/// Speeds and turn rates: `(u1, u2)` drive vehicle a, `(v1, v2)` vehicle b.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlPair {
    pub u1: f64,
    pub u2: f64,
    pub v1: f64,
    pub v2: f64,
}

impl ControlPair {
    pub const ZERO: ControlPair = ControlPair::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(u1: f64, u2: f64, v1: f64, v2: f64) -> Self {
        Self { u1, u2, v1, v2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.u1, self.u2, self.v1, self.v2]
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn swapped(self) -> Self {
        Self::new(self.v1, self.v2, self.u1, self.u2)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

/// Cost weights. The Hamiltonian multiplier is fixed at [`P0`] and is not a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    /// Control effort.
    pub delta: f64,
    /// Attraction of vehicle a to the origin.
    pub beta: f64,
    /// Attraction of vehicle b to the origin.
    pub alpha: f64,
    /// Inter-vehicle repulsion.
    pub rho: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            delta: 1.0,
            beta: 0.05,
            alpha: 0.05,
            rho: 1.0,
        }
    }
}

impl Weights {
    pub fn p0(&self) -> f64 {
        P0
    }

    pub fn swapped(self) -> Self {
        Self {
            beta: self.alpha,
            alpha: self.beta,
            ..self
        }
    }

    /// All invariant violations, in field order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.delta.is_finite() && self.delta > 0.0) {
            out.push("delta must be positive".to_string());
        }
        for (name, value) in [
            ("beta", self.beta),
            ("alpha", self.alpha),
            ("rho", self.rho),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                out.push(format!("{name} must be non-negative"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub initial: PairState,
    pub terminal: PairState,
    /// Final time `T`.
    pub horizon: f64,
}

impl BoundaryConditions {
    pub fn swapped(self) -> Self {
        Self {
            initial: self.initial.swapped(),
            terminal: self.terminal.swapped(),
            horizon: self.horizon,
        }
    }
}

/// Time derivative of the pair, `[x1', x2', x3', y1', y2', y3']`.
pub fn dynamics_rhs(state: &PairState, control: &ControlPair) -> [f64; 6] {
    let (sa, ca) = state.a.heading.sin_cos();
    let (sb, cb) = state.b.heading.sin_cos();
    [
        sa * control.u1,
        ca * control.u1,
        control.u2,
        sb * control.v1,
        cb * control.v1,
        control.v2,
    ]
}

pub fn separation_sq(state: &PairState) -> f64 {
    let d1 = state.a.pos1 - state.b.pos1;
    let d2 = state.a.pos2 - state.b.pos2;
    d1 * d1 + d2 * d2
}

/// Squared separation, or [`Error::SeparationTooSmall`] below the guard.
pub fn guarded_separation_sq(state: &PairState) -> Result<f64> {
    let d2 = separation_sq(state);
    if d2 < SEPARATION_GUARD || d2.is_nan() {
        return Err(Error::SeparationTooSmall {
            separation_sq: d2,
            step: None,
        });
    }
    Ok(d2)
}

/// Effort plus attraction contribution of one vehicle (without the 1/2).
fn vehicle_cost(delta: f64, attraction: f64, s: &VehicleState, speed: f64, turn: f64) -> f64 {
    delta * (speed * speed + turn * turn) + attraction * s.radius_sq()
}

/// Integrand of the cost functional:
/// `1/2 [delta |c|^2 + beta |a|^2 + alpha |b|^2 + rho / d^2]`.
pub fn running_cost(state: &PairState, control: &ControlPair, w: &Weights) -> Result<f64> {
    let d2 = guarded_separation_sq(state)?;
    let ta = vehicle_cost(w.delta, w.beta, &state.a, control.u1, control.u2);
    let tb = vehicle_cost(w.delta, w.alpha, &state.b, control.v1, control.v2);
    Ok(0.5 * ((ta + tb) + w.rho / d2))
}

/// Checks weights, horizon and endpoint separations; returns every violation.
pub fn validate_scenario(
    bc: &BoundaryConditions,
    w: &Weights,
) -> std::result::Result<(), Vec<String>> {
    let mut out = w.violations();
    if !(bc.horizon.is_finite() && bc.horizon > 0.0) {
        out.push("horizon must be positive".to_string());
    }
    for (name, s) in [("initial", &bc.initial), ("final", &bc.terminal)] {
        if !s.is_finite() {
            out.push(format!("{name} state must be finite"));
        } else if separation_sq(s) <= SEPARATION_GUARD {
            out.push(format!("{name} endpoint separation below guard"));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
