//! Run artifacts: `trajectory.csv`, `summary.txt`, `cost_history.csv` and
//! `plot.svg`. Every writer is a pure function of its inputs.

use std::fmt::Write as _;

use dubins_pair::model::separation_sq;
use dubins_pair::pmp::hamiltonian;
use dubins_pair::{BoundaryConditions, Result, Solution, SolveReport, Weights};

pub const TRAJECTORY_COLUMNS: [&str; 19] = [
    "t", "x1", "x2", "x3", "y1", "y2", "y3", "u1", "u2", "v1", "v2", "p1", "p2", "p3", "p4", "p5",
    "p6", "H", "sep",
];

pub const SWEEP_COLUMNS: [&str; 6] = [
    "value",
    "final_cost",
    "min_separation",
    "terminal_residual_norm",
    "iterations",
    "converged",
];

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest decimal that parses back to the same double.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
}

pub fn trajectory_csv(solution: &Solution, w: &Weights) -> Result<String> {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    let grid = solution.states.grid();
    let nodes = solution
        .states
        .nodes()
        .iter()
        .zip(solution.costates.nodes())
        .zip(solution.controls.nodes());
    for (k, ((s, p), c)) in nodes.enumerate() {
        let mut row = Vec::with_capacity(TRAJECTORY_COLUMNS.len());
        row.push(grid.time(k));
        row.extend(s.to_array());
        row.extend(c.to_array());
        row.extend(p.0);
        row.push(hamiltonian(s, p, c, w)?);
        row.push(separation_sq(s).sqrt());
        out.push_str(&join(&row));
        out.push('\n');
    }
    Ok(out)
}

fn report_lines(out: &mut String, prefix: &str, r: &SolveReport) {
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{prefix}{k} = {v}");
    };
    kv("method", r.method.to_string());
    kv("converged", r.converged.to_string());
    kv("iterations", r.iterations.to_string());
    kv("final_cost", num(r.final_cost));
    kv("augmented_cost", num(r.augmented_cost));
    kv("penalty_weights", join(&r.penalty_weights));
    kv("terminal_residual", join(&r.terminal_residual));
    kv("terminal_residual_norm", num(r.terminal_residual_norm()));
    kv("max_stationarity", num(r.max_stationarity));
    kv("hamiltonian_drift", num(r.hamiltonian_drift));
    kv("min_separation", num(r.min_separation));
    kv("cost_history_len", r.cost_history.len().to_string());
    kv("stop_reason", r.stop_reason.clone());
}

/// `key = value` lines. For a combined run the sweep stage follows under `fbsm.`.
pub fn summary(report: &SolveReport, sweep: Option<&SolveReport>, scenario_sha256: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool_version = {TOOL_VERSION}");
    let _ = writeln!(out, "scenario_sha256 = {scenario_sha256}");
    report_lines(&mut out, "", report);
    if let Some(s) = sweep {
        report_lines(&mut out, "fbsm.", s);
    }
    out
}

pub fn cost_history_csv(report: &SolveReport) -> String {
    let mut out = String::from("stage,weight_a,weight_b,augmented_cost\n");
    for c in &report.cost_history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.stage,
            num(c.penalty_weights[0]),
            num(c.penalty_weights[1]),
            num(c.augmented_cost)
        );
    }
    out
}

const PLOT_SIZE: f64 = 720.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

/// Planar paths of both vehicles with start (circle), end (square) and
/// target (cross) markers, on equal axes.
pub fn plot_svg(solution: &Solution, bc: &BoundaryConditions) -> String {
    let paths: [Vec<(f64, f64)>; 2] = [
        solution
            .states
            .nodes()
            .iter()
            .map(|s| (s.a.pos1, s.a.pos2))
            .collect(),
        solution
            .states
            .nodes()
            .iter()
            .map(|s| (s.b.pos1, s.b.pos2))
            .collect(),
    ];
    let targets = [
        (bc.terminal.a.pos1, bc.terminal.a.pos2),
        (bc.terminal.b.pos1, bc.terminal.b.pos2),
    ];
    let all = paths.iter().flatten().chain(targets.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = PLOT_SIZE / span;
    let width = (x1 - x0) * scale + 2.0 * MARGIN;
    let height = (y1 - y0) * scale + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) * scale;
    let py = |y: f64| height - MARGIN - (y - y0) * scale;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (v, path) in paths.iter().enumerate() {
        let color = COLORS[v];
        let points: Vec<String> = path
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let (sx, sy) = path[0];
        let (ex, ey) = path[path.len() - 1];
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{color}"/>"#,
            px(sx),
            py(sy)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#,
            px(ex) - 5.0,
            py(ey) - 5.0
        );
        let (tx, ty) = (px(targets[v].0), py(targets[v].1));
        let _ = writeln!(
            out,
            r#"<path d="M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}" stroke="black" stroke-width="1.5"/>"#,
            tx - 6.0,
            ty - 6.0,
            tx + 6.0,
            ty + 6.0,
            tx - 6.0,
            ty + 6.0,
            tx + 6.0,
            ty - 6.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="14" fill="{color}">vehicle {}</text>"#,
            MARGIN,
            20.0 + 18.0 * v as f64,
            v + 1
        );
    }
    out.push_str("</svg>\n");
    out
}
