//! Scenario files: a strict JSON key tree holding the boundary conditions,
//! weights, grid and solver options of one run.

use dubins_pair::model::separation_sq;
use dubins_pair::{
    BoundaryConditions, Method, PairState, PenaltySchedule, SolveOptions, TimeGrid, VehicleState,
    Weights, SEPARATION_GUARD,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_STEPS: usize = 2000;

/// Parameters accepted by [`ScenarioFile::set_param`].
pub const SWEEP_PARAMS: [&str; 6] = ["delta", "beta", "alpha", "rho", "horizon", "wT"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Free text, ignored by the solvers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub weights: WeightsSpec,
    pub vehicle1: VehicleSpec,
    pub vehicle2: VehicleSpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSpec {
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub rho: f64,
}

impl Default for WeightsSpec {
    fn default() -> Self {
        let w = Weights::default();
        Self {
            delta: w.delta,
            beta: w.beta,
            alpha: w.alpha,
            rho: w.rho,
        }
    }
}

/// `[pos1, pos2, heading]` at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub initial: [f64; 3],
    #[serde(rename = "final")]
    pub terminal: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySpec {
    pub initial: f64,
    pub growth: f64,
    pub max: f64,
}

impl Default for PenaltySpec {
    fn default() -> Self {
        let p = PenaltySchedule::default();
        Self {
            initial: p.initial,
            growth: p.growth,
            max: p.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: String,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub cost_tolerance: f64,
    pub armijo_slope: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub penalty: PenaltySpec,
    pub residual_tolerance: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self {
            method: o.method.to_string(),
            max_iterations: o.max_iterations,
            gradient_tolerance: o.gradient_tolerance,
            cost_tolerance: o.cost_tolerance,
            armijo_slope: o.armijo_slope,
            backtrack_factor: o.backtrack_factor,
            initial_step: o.initial_step,
            penalty: PenaltySpec::default(),
            residual_tolerance: o.residual_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// Malformed JSON.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Field-path-prefixed messages, all of them.
    Validation(Vec<String>),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioError::Syntax {
                line,
                column,
                message,
            } => write!(f, "syntax error at line {line}, column {column}: {message}"),
            ScenarioError::Validation(v) => write!(f, "invalid scenario:\n  {}", v.join("\n  ")),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// The problem a scenario describes, in solver types.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub bc: BoundaryConditions,
    pub weights: Weights,
    pub grid: TimeGrid,
    pub options: SolveOptions,
}

/// Parses and validates a scenario. Omitted optional fields take their defaults.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let parsed: Result<ScenarioFile, _> = serde_path_to_error::deserialize(de);
    let scenario = match parsed {
        Ok(s) => s,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Data => {
                    let msg = strip_position(&inner.to_string());
                    ScenarioError::Validation(vec![if path == "." {
                        msg
                    } else {
                        format!("{path}: {msg}")
                    }])
                }
                _ => ScenarioError::Syntax {
                    line: inner.line(),
                    column: inner.column(),
                    message: strip_position(&inner.to_string()),
                },
            });
        }
    };
    let v = scenario.violations();
    if v.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(v))
    }
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn vehicle_state(v: [f64; 3]) -> VehicleState {
    VehicleState::new(v[0], v[1], v[2])
}

impl ScenarioFile {
    /// Canonical text: pretty JSON with every field spelled out.
    pub fn serialize(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario is always serializable");
        s.push('\n');
        s
    }

    /// SHA-256 of [`ScenarioFile::serialize`], lower-case hex.
    pub fn sha256(&self) -> String {
        Sha256::digest(self.serialize().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn method(&self) -> Option<Method> {
        self.solver.method.parse().ok()
    }

    pub fn boundary_conditions(&self) -> BoundaryConditions {
        BoundaryConditions {
            initial: PairState::new(
                vehicle_state(self.vehicle1.initial),
                vehicle_state(self.vehicle2.initial),
            ),
            terminal: PairState::new(
                vehicle_state(self.vehicle1.terminal),
                vehicle_state(self.vehicle2.terminal),
            ),
            horizon: self.horizon,
        }
    }

    pub fn weights(&self) -> Weights {
        let w = &self.weights;
        Weights {
            delta: w.delta,
            beta: w.beta,
            alpha: w.alpha,
            rho: w.rho,
        }
    }

    pub fn options(&self) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            method: self.method().unwrap_or(Method::Fbsm),
            max_iterations: s.max_iterations,
            gradient_tolerance: s.gradient_tolerance,
            cost_tolerance: s.cost_tolerance,
            armijo_slope: s.armijo_slope,
            backtrack_factor: s.backtrack_factor,
            initial_step: s.initial_step,
            penalty: PenaltySchedule {
                initial: s.penalty.initial,
                growth: s.penalty.growth,
                max: s.penalty.max,
            },
            residual_tolerance: s.residual_tolerance,
            ..SolveOptions::default()
        }
    }

    /// Solver inputs. Call only on a scenario without violations.
    pub fn problem(&self) -> Problem {
        Problem {
            bc: self.boundary_conditions(),
            weights: self.weights(),
            grid: TimeGrid::new(self.horizon, self.steps).expect("validated grid"),
            options: self.options(),
        }
    }

    /// Every invariant violation, prefixed with its field path.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            out.push("horizon: must be positive".to_string());
        }
        if self.steps == 0 {
            out.push("steps: must be at least 1".to_string());
        }
        let w = &self.weights;
        if !(w.delta.is_finite() && w.delta > 0.0) {
            out.push("weights.delta: must be positive".to_string());
        }
        for (name, v) in [("beta", w.beta), ("alpha", w.alpha), ("rho", w.rho)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(format!("weights.{name}: must be non-negative"));
            }
        }
        let bc = self.boundary_conditions();
        for (end, s) in [("initial", bc.initial), ("final", bc.terminal)] {
            if s.is_finite() && separation_sq(&s) <= SEPARATION_GUARD {
                out.push(format!(
                    "vehicle1.{end}, vehicle2.{end}: endpoint separation below guard"
                ));
            }
        }
        if let Err(e) = self.solver.method.parse::<Method>() {
            out.push(format!("solver.method: {e}"));
        }
        out.extend(
            self.options()
                .violations()
                .into_iter()
                .map(|v| format!("solver.{v}")),
        );
        out
    }

    /// Overrides one sweep parameter; `wT` is the initial terminal penalty weight.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), String> {
        match name {
            "delta" => self.weights.delta = value,
            "beta" => self.weights.beta = value,
            "alpha" => self.weights.alpha = value,
            "rho" => self.weights.rho = value,
            "horizon" => self.horizon = value,
            "wT" => self.solver.penalty.initial = value,
            other => {
                return Err(format!(
                    "unknown parameter '{other}' (expected one of {})",
                    SWEEP_PARAMS.join(", ")
                ))
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "vehicle1": {"initial": [5.5, 0, 0], "final": [0, 2.0, 0]},
        "vehicle2": {"initial": [15.5, 0, 0], "final": [9.8, 0, 0]}
    }"#;

    #[test]
    fn defaults_fill_omitted_fields() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.horizon, DEFAULT_HORIZON);
        assert_eq!(s.steps, DEFAULT_STEPS);
        assert_eq!(s.weights(), Weights::default());
        assert_eq!(s.options(), SolveOptions::default());
        assert_eq!(s.boundary_conditions().initial.b.pos1, 15.5);
    }

    #[test]
    fn unknown_key_is_rejected_with_path() {
        let text = MINIMAL.replacen("\"vehicle1\"", "\"weights\": {\"rh0\": 2}, \"vehicle1\"", 1);
        match parse_scenario(&text) {
            Err(ScenarioError::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert!(v[0].starts_with("weights.rh0: unknown field"), "{v:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_scenario("{\n  \"horizon\": 1,,\n}") {
            Err(ScenarioError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 16)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn violations_are_all_collected() {
        let text = MINIMAL.replacen(
            "\"vehicle1\"",
            "\"horizon\": -1, \"weights\": {\"delta\": 0, \"rho\": -1}, \"solver\": {\"method\": \"newton\"}, \"vehicle1\"",
            1,
        );
        assert_eq!(
            parse_scenario(&text),
            Err(ScenarioError::Validation(vec![
                "horizon: must be positive".into(),
                "weights.delta: must be positive".into(),
                "weights.rho: must be non-negative".into(),
                "solver.method: unknown method 'newton' (expected fbsm, shooting or both)".into(),
            ]))
        );
    }

    #[test]
    fn serialize_round_trip() {
        let mut s = parse_scenario(MINIMAL).unwrap();
        s.note = Some("x".into());
        s.weights.beta = 0.1 + 0.2;
        assert_eq!(parse_scenario(&s.serialize()).unwrap(), s);
    }
}
