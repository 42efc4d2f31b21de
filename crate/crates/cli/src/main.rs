use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dubins_pair::Method;
use dubins_pair_cli::commands::parse_values;
use dubins_pair_cli::{parse_scenario, run_check, run_solve, run_sweep, Exit, ScenarioFile};

#[derive(Parser)]
#[command(
    name = "dubins-pair",
    version,
    about = "Extremal trajectories for a pair of Dubins vehicles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// fbsm, shooting or both; overrides the scenario.
    #[arg(long)]
    method: Option<Method>,
    /// Grid steps; overrides the scenario.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and write trajectory.csv, summary.txt and plot.svg.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve, then run the verification table.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test hook: corrupts the adjoint gradient before the oracle comparison.
        #[arg(long, hide = true)]
        inject_gradient_fault: bool,
    },
    /// One solve per parameter value, each in its own sub-directory.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// delta, beta, alpha, rho, horizon or wT.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn load(common: &Common) -> Result<ScenarioFile, Exit> {
    let text = std::fs::read_to_string(&common.scenario).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", common.scenario.display());
        Exit::InputError
    })?;
    let mut s = parse_scenario(&text).map_err(|e| {
        eprintln!("error: {}: {e}", common.scenario.display());
        Exit::InputError
    })?;
    if let Some(m) = common.method {
        s.solver.method = m.to_string();
    }
    if let Some(n) = common.steps {
        s.steps = n;
    }
    let v = s.violations();
    if !v.is_empty() {
        eprintln!("error: invalid overrides:\n  {}", v.join("\n  "));
        return Err(Exit::InputError);
    }
    Ok(s)
}

fn dispatch(cli: Cli) -> Exit {
    match cli.command {
        Command::Solve { common, out } => match load(&common) {
            Ok(s) => run_solve(&s, &out),
            Err(code) => code,
        },
        Command::Check {
            common,
            out,
            inject_gradient_fault,
        } => match load(&common) {
            Ok(s) => run_check(&s, out.as_deref(), inject_gradient_fault),
            Err(code) => code,
        },
        Command::Sweep {
            common,
            out,
            param,
            values,
        } => {
            let values = match parse_values(&values) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("error: --values: {e}");
                    return Exit::InputError;
                }
            };
            match load(&common) {
                Ok(s) => run_sweep(&s, &param, &values, Path::new(&out)),
                Err(code) => code,
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Exit::InputError.code()
            } else {
                0
            });
        }
    };
    ExitCode::from(dispatch(cli).code())
}
