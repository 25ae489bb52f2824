//! `mgsim` — command-line front end for the zonal DC microgrid simulator.
//!
//! Subcommands: `validate` checks a netlist or scenario without running it,
//! `run` simulates one scenario and writes the recorded time series as CSV,
//! `sweep` runs one simulation per value of a scalar parameter and prints a
//! comparison table.
//!
//! Exit codes: 0 success, 1 validation failure (bad input text, bad
//! arguments, unrunnable configuration), 2 I/O failure, 3 numerical
//! divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mgsim_core::scenario::ScenarioError;
use mgsim_core::solver::Method;
use mgsim_core::summary::RunSummary;
use mgsim_core::{
    builtin_names, builtin_scenario, load_scenario_text, simulate, summarize, Engine, Scenario,
    SimulationError,
};

/// Environment variable holding an extra directory searched for scenario
/// files named on the command line.
const SCENARIO_PATH_VAR: &str = "MGSIM_SCENARIO_PATH";

#[derive(Parser)]
#[command(
    name = "mgsim",
    version,
    about = "Deterministic simulator for zonal DC microgrids",
    after_help = "Scenario arguments are resolved in order: an existing file path, a bundled \
                  scenario name (see `mgsim run --help`), then a file under $MGSIM_SCENARIO_PATH.\n\
                  Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 numerical divergence."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a netlist or scenario without simulating it.
    Validate {
        /// Scenario file, bundled name, or $MGSIM_SCENARIO_PATH entry.
        source: String,
    },
    /// Simulate a scenario and write the recorded time series as CSV.
    Run {
        /// Scenario file, bundled name, or $MGSIM_SCENARIO_PATH entry.
        source: String,
        /// Output CSV path.
        out_csv: PathBuf,
        #[command(flatten)]
        overrides: SolverOverrides,
        /// Print the run summary as JSON instead of text.
        #[arg(long)]
        summary_json: bool,
        /// Reserved for interface stability; runs are deterministic and the
        /// value is ignored.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Run one simulation per parameter value and print a comparison table.
    Sweep {
        /// Scenario file, bundled name, or $MGSIM_SCENARIO_PATH entry.
        source: String,
        /// Scalar parameter to vary: solver.dt, solver.t_end, droop.rbase,
        /// secondary.kp, secondary.ki, rect.kp, rect.ki, or ess.rate.
        #[arg(long)]
        param: String,
        /// Comma-separated values; an empty list runs nothing.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: SolverOverrides,
        /// Print one JSON document per run instead of the table.
        #[arg(long)]
        summary_json: bool,
        /// Reserved for interface stability; ignored.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
}

/// Command-line solver settings; each one overrides the scenario file.
#[derive(Args)]
struct SolverOverrides {
    /// Integration step (s).
    #[arg(long, value_name = "S")]
    dt: Option<f64>,
    /// Integration method: euler or rk4.
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    /// End time (s).
    #[arg(long, value_name = "S")]
    t_end: Option<f64>,
    /// Record every n-th step.
    #[arg(long, value_name = "N")]
    decimation: Option<usize>,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn divergence(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    fn from_scenario_error(err: ScenarioError) -> Self {
        match err {
            ScenarioError::Io { .. } => Failure::io(err.to_string()),
            _ => Failure::validation(err.to_string()),
        }
    }

    fn from_simulation_error(err: SimulationError) -> Self {
        match err {
            SimulationError::Divergence { .. } => Failure::divergence(err.to_string()),
            SimulationError::Config(_) => Failure::validation(err.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // bad invocation.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Validate { source } => cmd_validate(&source),
        Command::Run {
            source,
            out_csv,
            overrides,
            summary_json,
            seed: _,
        } => cmd_run(&source, &out_csv, &overrides, summary_json),
        Command::Sweep {
            source,
            param,
            values,
            overrides,
            summary_json,
            seed: _,
        } => cmd_sweep(&source, &param, &values, &overrides, summary_json),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// Reads scenario text: an existing file wins, then a bundled name, then a
/// file under `$MGSIM_SCENARIO_PATH`. Returns the text and the directory
/// that anchors relative includes, if any.
fn read_source(source: &str) -> Result<(String, Option<PathBuf>), Failure> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))?;
        return Ok((text, path.parent().map(Path::to_path_buf)));
    }
    if let Some(text) = builtin_scenario(source) {
        return Ok((text.to_string(), None));
    }
    if let Ok(dir) = std::env::var(SCENARIO_PATH_VAR) {
        let candidate = Path::new(&dir).join(source);
        if candidate.is_file() {
            let text = std::fs::read_to_string(&candidate)
                .map_err(|e| Failure::io(format!("cannot read {}: {e}", candidate.display())))?;
            return Ok((text, candidate.parent().map(Path::to_path_buf)));
        }
    }
    Err(Failure::io(format!(
        "cannot read '{source}': not a file, not one of the bundled scenarios ({}), and not \
         found under ${SCENARIO_PATH_VAR}",
        builtin_names().join(", ")
    )))
}

fn load_source(source: &str) -> Result<Scenario, Failure> {
    let (text, base_dir) = read_source(source)?;
    load_scenario_text(&text, base_dir.as_deref()).map_err(Failure::from_scenario_error)
}

fn apply_overrides(scenario: &mut Scenario, overrides: &SolverOverrides) -> Result<(), Failure> {
    if let Some(dt) = overrides.dt {
        scenario.solver.dt = dt;
    }
    if let Some(name) = &overrides.method {
        scenario.solver.method = name.parse::<Method>().map_err(Failure::validation)?;
    }
    if let Some(t_end) = overrides.t_end {
        scenario.solver.t_end = t_end;
    }
    if let Some(decimation) = overrides.decimation {
        scenario.solver.decimation = decimation;
    }
    Ok(())
}

fn cmd_validate(source: &str) -> Result<(), Failure> {
    let scenario = load_source(source)?;
    // Engine construction performs the full pre-flight: topology findings,
    // causal schedule, solver sanity, and control-reference checks.
    Engine::new(&scenario).map_err(Failure::from_simulation_error)?;
    println!(
        "ok: {} nodes, {} edges, {} generators, {} storage units, t_end {} s",
        scenario.topology.node_count(),
        scenario.topology.edge_count(),
        scenario.pgms.len(),
        scenario
            .loads
            .iter()
            .filter(|l| l.storage.is_some())
            .count(),
        scenario.solver.t_end
    );
    Ok(())
}

fn cmd_run(
    source: &str,
    out_csv: &Path,
    overrides: &SolverOverrides,
    summary_json: bool,
) -> Result<(), Failure> {
    let mut scenario = load_source(source)?;
    apply_overrides(&mut scenario, overrides)?;
    let series = simulate(&scenario).map_err(Failure::from_simulation_error)?;

    let file = std::fs::File::create(out_csv)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", out_csv.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    series
        .write_csv(&mut writer)
        .and_then(|()| std::io::Write::flush(&mut writer))
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", out_csv.display())))?;

    let summary = summarize(&scenario, &series);
    if summary_json {
        println!("{}", render_json(&summary)?);
    } else {
        print!("{}", summary.to_text());
    }
    Ok(())
}

fn cmd_sweep(
    source: &str,
    param: &str,
    values: &[f64],
    overrides: &SolverOverrides,
    summary_json: bool,
) -> Result<(), Failure> {
    let mut base = load_source(source)?;
    apply_overrides(&mut base, overrides)?;
    if values.is_empty() {
        println!("sweep {param}: no values, nothing to run");
        return Ok(());
    }

    let mut runs = Vec::with_capacity(values.len());
    for &value in values {
        let mut scenario = base.clone();
        apply_param(&mut scenario, param, value)?;
        runs.push(scenario);
    }

    // Independent runs fan out across workers; results keep input order.
    let outcomes: Vec<Result<RunSummary, SimulationError>> = runs
        .par_iter()
        .map(|scenario| simulate(scenario).map(|series| summarize(scenario, &series)))
        .collect();

    let mut diverged = false;
    if summary_json {
        // One compact document per line so downstream tools can stream them.
        for (value, outcome) in values.iter().zip(&outcomes) {
            let mut doc = serde_json::Map::new();
            doc.insert(param.to_string(), serde_json::json!(value));
            match outcome {
                Ok(summary) => {
                    let rendered = serde_json::to_value(summary).map_err(|e| {
                        Failure::validation(format!("cannot serialize summary: {e}"))
                    })?;
                    doc.insert("summary".to_string(), rendered);
                }
                Err(err) => {
                    doc.insert("error".to_string(), serde_json::json!(err.to_string()));
                    diverged = true;
                }
            }
            println!("{}", serde_json::Value::Object(doc));
        }
    } else {
        println!("sweep {param} over {} values of {source}", values.len());
        println!(
            "{:>12}  {:>17}  {:>13}  {:>15}  {:>12}",
            "value", "worst share err %", "bus max dev V", "peak storage kW", "final bus V"
        );
        for (value, outcome) in values.iter().zip(&outcomes) {
            match outcome {
                Ok(summary) => {
                    let worst_share = summary
                        .intervals
                        .iter()
                        .flat_map(|i| i.generators.iter())
                        .map(|g| (g.share / g.target_share - 1.0).abs())
                        .fold(0.0, f64::max);
                    let peak_storage = summary
                        .storage
                        .iter()
                        .map(|s| s.peak_discharge_w.max(-s.peak_charge_w))
                        .fold(0.0, f64::max);
                    println!(
                        "{:>12}  {:>17.3}  {:>13.2}  {:>15.1}  {:>12.2}",
                        value,
                        100.0 * worst_share,
                        summary.bus.max_deviation_v,
                        peak_storage / 1e3,
                        summary.bus.final_mean_v
                    );
                }
                Err(err) => {
                    println!("{value:>12}  {err}");
                    diverged = true;
                }
            }
        }
    }
    if diverged {
        return Err(Failure::divergence(
            "at least one sweep run diverged".to_string(),
        ));
    }
    Ok(())
}

/// Sets one scalar parameter across the resolved scenario.
fn apply_param(scenario: &mut Scenario, param: &str, value: f64) -> Result<(), Failure> {
    match param {
        "solver.dt" => scenario.solver.dt = value,
        "solver.t_end" => scenario.solver.t_end = value,
        "droop.rbase" => {
            scenario.r_base = value;
            for pgm in &mut scenario.pgms {
                pgm.droop.resistance = value / pgm.weight;
            }
        }
        "secondary.kp" => scenario.secondary.kp = value,
        "secondary.ki" => scenario.secondary.ki = value,
        "rect.kp" => {
            for pgm in &mut scenario.pgms {
                pgm.rect_kp = value;
            }
        }
        "rect.ki" => {
            for pgm in &mut scenario.pgms {
                pgm.rect_ki = value;
            }
        }
        "ess.rate" => {
            let mut touched = 0;
            for load in &mut scenario.loads {
                if let Some(storage) = &mut load.storage {
                    storage.filter_rate = value;
                    touched += 1;
                }
            }
            if touched == 0 {
                return Err(Failure::validation(
                    "parameter 'ess.rate': the scenario has no storage units",
                ));
            }
        }
        other => {
            return Err(Failure::validation(format!(
                "unknown parameter '{other}' (expected solver.dt, solver.t_end, droop.rbase, \
                 secondary.kp, secondary.ki, rect.kp, rect.ki, or ess.rate)"
            )));
        }
    }
    Ok(())
}

fn render_json(summary: &RunSummary) -> Result<String, Failure> {
    serde_json::to_string_pretty(summary)
        .map_err(|e| Failure::validation(format!("cannot serialize summary: {e}")))
}
