mod commands;
mod scenario;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use commands::{Artifacts, Failure};
use scenario::{Command, Scenario};

/// Optimal spiking controls for phase-model neuron ensembles.
///
/// Exit status: 0 on success, 1 on input errors, 2 when no admissible control exists.
#[derive(Debug, Parser)]
#[command(name = "phasectl", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
    /// Seed for multistart; overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Collocation order N for spike-ensemble; overrides `ensemble.order`.
    #[arg(long)]
    order: Option<usize>,
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), String> {
    std::fs::write(dir.join(name), body).map_err(|e| format!("cannot write {}: {e}", dir.join(name).display()))
}

fn emit(art: &Artifacts, out: &Path, svg: bool) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    write(out, "report.json", &art.report_json())?;
    if let Some(csv) = art.trajectory_csv() {
        write(out, "trajectory.csv", &csv)?;
    }
    if let Some(csv) = art.control_csv() {
        write(out, "control.csv", &csv)?;
    }
    for (name, body) in &art.extra {
        write(out, name, body)?;
    }
    if svg {
        for (name, plot) in &art.plots {
            write(out, name, &plot.render())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let scenario = match Scenario::load(&cli.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command, &scenario, cli.seed, cli.order) {
        Ok(art) => {
            if let Err(e) = emit(&art, &cli.out, cli.svg) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            match &art.infeasible {
                Some(msg) => {
                    eprintln!("infeasible: {msg}");
                    ExitCode::from(2)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
    }
}
