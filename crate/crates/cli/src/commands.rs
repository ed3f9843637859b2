//! Maps each scenario command onto the solver calls and collects the artifacts.

use std::f64::consts::PI;

use phasesync::controllability::{rank_test, DEFAULT_RANK_TOL};
use phasesync::integrate::DEFAULT_STEPS;
use phasesync::nlp::MinimizeOptions;
use phasesync::numfmt::{round_json, sig9};
use phasesync::pseudospectral::{solve_ensemble, CollocationProblem, EnsembleOptions};
use phasesync::single::{solve_min_power, time_optimal_single};
use phasesync::two_neuron::{synthesize, SynthesisOptions, ThetaPair};
use phasesync::{integrate, Error, PhaseModel, SolveReport, Trajectory};
use serde_json::{json, Value};

use crate::scenario::{Command, ControlSource, InputError, Scenario};
use crate::svg::{Plot, Rect, Series};

/// Everything a command produces; written to disk by the caller.
pub struct Artifacts {
    pub command: Command,
    pub seed: Option<u64>,
    pub runs: Vec<(SolveReport, Trajectory)>,
    pub summary: Value,
    pub extra: Vec<(String, String)>,
    pub plots: Vec<(String, Plot)>,
    /// Set when the command ran but no admissible control was found.
    pub infeasible: Option<String>,
}

pub enum Failure {
    Input(String),
    Infeasible(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_infeasible() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

/// Diagnostic key holding the RK4 step count, reused when a report is re-simulated.
const ORACLE_STEPS: &str = "oracle_steps";

impl Artifacts {
    fn new(command: Command, seed: Option<u64>) -> Self {
        Self {
            command,
            seed,
            runs: Vec::new(),
            summary: Value::Null,
            extra: Vec::new(),
            plots: Vec::new(),
            infeasible: None,
        }
    }

    /// The `report.json` document, floats at nine significant digits.
    pub fn report_json(&self) -> String {
        let runs: Vec<Value> = self.runs.iter().map(|(r, _)| serde_json::to_value(r).expect("serializable")).collect();
        let mut v = json!({
            "schema_version": crate::scenario::SCHEMA_VERSION,
            "command": self.command.name(),
            "seed": self.seed,
            "status": if self.infeasible.is_some() { "infeasible" } else { "ok" },
            "runs": runs,
            "summary": self.summary,
        });
        if let Some(msg) = &self.infeasible {
            v["message"] = Value::String(msg.clone());
        }
        round_json(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("serializable");
        s.push('\n');
        s
    }

    pub fn trajectory_csv(&self) -> Option<String> {
        self.csv(|t| t.to_csv())
    }

    pub fn control_csv(&self) -> Option<String> {
        self.csv(|t| {
            let mut s = String::from("t,u\n");
            for (time, u) in t.times.iter().zip(&t.controls) {
                s.push_str(&format!("{},{}\n", sig9(*time), sig9(*u)));
            }
            s
        })
    }

    /// Per-run CSV bodies prefixed with a `run` column.
    fn csv(&self, body: impl Fn(&Trajectory) -> String) -> Option<String> {
        if self.runs.is_empty() {
            return None;
        }
        let mut out = String::new();
        for (i, (_, t)) in self.runs.iter().enumerate() {
            let text = body(t);
            let mut lines = text.lines();
            let header = lines.next().unwrap_or_default();
            if i == 0 {
                out.push_str("run,");
                out.push_str(header);
                out.push('\n');
            }
            for l in lines {
                out.push_str(&format!("{i},{l}\n"));
            }
        }
        Some(out)
    }
}

pub fn run(command: Command, scenario: &Scenario, seed: Option<u64>, order: Option<usize>) -> Result<Artifacts, Failure> {
    scenario.validate(command)?;
    let seed = seed.or(scenario.seed);
    let mut art = Artifacts::new(command, seed);
    match command {
        Command::Simulate => simulate(scenario, &mut art)?,
        Command::Controllability => controllability(scenario, &mut art)?,
        Command::SpikeSingle => spike_single(scenario, &mut art)?,
        Command::TimeOptimalSingle => time_optimal(scenario, &mut art)?,
        Command::SpikeTwoTimeopt => spike_two(scenario, &mut art)?,
        Command::SpikeEnsemble => ensemble(scenario, order, &mut art)?,
    }
    Ok(art)
}

fn models(s: &Scenario) -> Result<Vec<PhaseModel>, Failure> {
    Ok(s.models.as_ref().expect("validated").build()?)
}

fn simulate(s: &Scenario, art: &mut Artifacts) -> Result<(), Failure> {
    let spec = s.simulate.as_ref().expect("validated");
    let (models, control, horizon, target, steps) = match &spec.control {
        ControlSource::Inline(c) => (models(s)?, c.build()?, spec.horizon.expect("validated"), spec.target.clone(), spec.steps),
        ControlSource::Report(r) => {
            let path = s.resolve(&r.from_report);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Failure::Input(format!("simulate.control.from_report: cannot read {}: {e}", path.display())))?;
            let doc: Value = serde_json::from_str(&text)
                .map_err(|e| Failure::Input(format!("simulate.control.from_report: {}: {e}", path.display())))?;
            let run = doc
                .get("runs")
                .and_then(|v| v.get(r.run))
                .ok_or_else(|| Failure::Input(format!("simulate.control.run: report has no run {}", r.run)))?;
            let rep = SolveReport::from_json(&run.to_string())?;
            let models = match &s.models {
                Some(m) => m.build()?,
                None => rep.models.clone(),
            };
            let steps = spec
                .steps
                .or_else(|| rep.diagnostics.get(ORACLE_STEPS).and_then(Value::as_u64).map(|v| v as usize));
            let target = spec.target.clone().or((!rep.target.is_empty()).then(|| rep.target.clone()));
            (models, rep.control.build()?, spec.horizon.unwrap_or(rep.horizon), target, steps)
        }
    };
    if let Some(t) = &target {
        if t.len() != models.len() {
            return Err(Failure::Input(format!(
                "simulate.target: expected {} entries, got {}",
                models.len(),
                t.len()
            )));
        }
    }
    let initial = spec.initial.clone().unwrap_or_else(|| vec![0.0; models.len()]);
    if initial.len() != models.len() {
        return Err(Failure::Input(format!(
            "simulate.initial: expected {} entries, got {}",
            models.len(),
            initial.len()
        )));
    }
    let steps = steps.unwrap_or(DEFAULT_STEPS);
    let traj = integrate(&models, &control, horizon, &initial, horizon / steps as f64)?;
    let report = SolveReport::new("simulate", &models, &control, &traj, target.as_deref().unwrap_or(&[]))?.diagnostic(ORACLE_STEPS, steps);
    art.summary = json!({ "spike_counts": report.spikes.iter().map(Vec::len).collect::<Vec<_>>() });
    art.plots.push(("phase.svg".into(), phase_plot("phases", &[&traj])));
    art.plots.push(("control.svg".into(), control_plot("control", &[("u", &traj)])));
    art.plots.push(("raster.svg".into(), raster(&report.spikes)));
    art.runs.push((report, traj));
    Ok(())
}

fn controllability(s: &Scenario, art: &mut Artifacts) -> Result<(), Failure> {
    let spec = s.controllability.as_ref().expect("validated");
    let r = rank_test(&models(s)?, &spec.state, spec.tol.unwrap_or(DEFAULT_RANK_TOL))?;
    art.summary = serde_json::to_value(&r).expect("serializable");
    Ok(())
}

fn spike_single(s: &Scenario, art: &mut Artifacts) -> Result<(), Failure> {
    let spec = s.spike_single.as_ref().expect("validated");
    let model = models(s)?[0];
    let bound = spec.bound.unwrap_or(f64::INFINITY);
    let steps = spec.steps.unwrap_or(DEFAULT_STEPS);
    let mut summary = Vec::new();
    for &t in &spec.horizons {
        let sol = solve_min_power(&model, t, bound)?;
        let control = sol.control();
        let traj = integrate(&[model], &control, t, &[0.0], t / steps as f64)?;
        let report = SolveReport::new("spike-single", &[model], &control, &traj, &[2.0 * PI])?
            .with_cost(sol.energy)
            .diagnostic(ORACLE_STEPS, steps)
            .diagnostic("lambda0", sol.lambda0)
            .diagnostic("saturated", sol.is_saturated())
            .diagnostic("saturation_level", sol.saturation_level)
            .diagnostic("switch_angles", &sol.switch_angles);
        summary.push(json!({ "horizon": t, "lambda0": sol.lambda0, "energy": sol.energy, "saturated": sol.is_saturated() }));
        art.runs.push((report, traj));
    }
    art.summary = Value::Array(summary);
    let labelled: Vec<(String, &Trajectory)> = art.runs.iter().map(|(r, t)| (format!("T = {}", sig9(r.horizon)), t)).collect();
    let refs: Vec<(&str, &Trajectory)> = labelled.iter().map(|(l, t)| (l.as_str(), *t)).collect();
    art.plots.push(("control.svg".into(), control_plot("minimum-power controls", &refs)));
    let trajs: Vec<&Trajectory> = art.runs.iter().map(|(_, t)| t).collect();
    art.plots.push(("phase.svg".into(), phase_plot("phases", &trajs)));
    Ok(())
}

fn time_optimal(s: &Scenario, art: &mut Artifacts) -> Result<(), Failure> {
    let spec = s.time_optimal_single.as_ref().expect("validated");
    let model = models(s)?[0];
    let sol = time_optimal_single(&model, spec.bound)?;
    let steps = spec.steps.unwrap_or(DEFAULT_STEPS);
    let traj = integrate(&[model], &sol.control, sol.t_min, &[0.0], sol.t_min / steps as f64)?;
    let report = SolveReport::new("time-optimal-single", &[model], &sol.control, &traj, &[2.0 * PI])?
        .with_cost(sol.t_min)
        .diagnostic(ORACLE_STEPS, steps);
    art.summary = json!({ "t_min": sol.t_min });
    art.plots.push(("control.svg".into(), control_plot("time-optimal control", &[("u", &traj)])));
    art.plots.push(("phase.svg".into(), phase_plot("phase", &[&traj])));
    art.runs.push((report, traj));
    Ok(())
}

fn spike_two(s: &Scenario, art: &mut Artifacts) -> Result<(), Failure> {
    let spec = s.spike_two.as_ref().expect("validated");
    let m = models(s)?;
    let defaults = SynthesisOptions::default();
    let opts = SynthesisOptions {
        first_switch_grid: spec.first_switch_grid.unwrap_or(defaults.first_switch_grid),
        max_switches: spec.max_switches.unwrap_or(defaults.max_switches),
        ..defaults
    };
    let sol = synthesize([m[0].current, m[1].current], spec.bound, spec.windings, &opts)?;
    let control = sol.control();
    let steps = sol.trajectory.len() - 1;
    let report = SolveReport::new("spike-two-timeopt", &m, &control, &sol.trajectory, &sol.target)?
        .with_cost(sol.schedule.horizon)
        .diagnostic(ORACLE_STEPS, steps)
        .diagnostic("switch_points", &sol.switch_points)
        .diagnostic("classifications", &sol.classifications)
        .diagnostic("candidates", sol.candidates);
    art.summary = sol.to_json();
    art.plots.push(("control.svg".into(), control_plot("time-optimal bang-bang control", &[("u", &sol.trajectory)])));
    art.plots.push(("phase.svg".into(), phase_plot("phases", &[&sol.trajectory])));
    art.plots.push(("phase_plane.svg".into(), phase_plane(&sol.pair, &sol.trajectory, sol.target)));
    art.runs.push((report, sol.trajectory));
    Ok(())
}

fn ensemble(s: &Scenario, order: Option<usize>, art: &mut Artifacts) -> Result<(), Failure> {
    let spec = s.ensemble.as_ref().expect("validated");
    let m = models(s)?;
    let targets: Vec<f64> = match (&spec.windings, &spec.targets) {
        (Some(w), _) => w.iter().map(|&k| 2.0 * PI * k as f64).collect(),
        (_, Some(t)) => t.clone(),
        _ => unreachable!("validated"),
    };
    let order = order.or(spec.order).unwrap_or(if m.len() <= 2 { 40 } else { 60 });
    if order < 2 {
        return Err(Failure::Input(format!("--order: must be >= 2, got {order}")));
    }
    let problem = CollocationProblem::new(
        order,
        m.clone(),
        spec.horizon,
        targets.clone(),
        spec.w_term.unwrap_or(0.0),
        spec.w_energy.unwrap_or(1.0),
        spec.bound,
    )?;
    let opts = EnsembleOptions {
        multistart: spec.multistart.unwrap_or(0),
        seed: art.seed.unwrap_or(0),
        ..EnsembleOptions::default()
    };
    let sol = solve_ensemble(&problem, &MinimizeOptions::default(), &opts)?;
    let mut report = SolveReport::new("spike-ensemble", &m, &sol.control, &sol.trajectory, &targets)?
        .with_cost(sol.energy)
        .diagnostic(ORACLE_STEPS, opts.oracle_steps)
        .diagnostic("order", order)
        .diagnostic("converged", sol.nlp.converged)
        .diagnostic("constraint_violation", sol.nlp.constraint_violation)
        .diagnostic("optimality", sol.nlp.optimality)
        .diagnostic("iterations", sol.nlp.iterations)
        .diagnostic("outer_iterations", sol.nlp.outer_iterations)
        .diagnostic("start_seed", sol.start_seed)
        .diagnostic("seeds_tried", &sol.seeds_tried)
        .diagnostic("target_times", &sol.target_times);
    if let Some(seed) = art.seed {
        report = report.with_seed(seed);
    }
    let mut nodes = String::from("t");
    for k in 1..=m.len() {
        nodes.push_str(&format!(",theta_{k}"));
    }
    nodes.push_str(",u\n");
    for ((t, row), u) in sol.node_times.iter().zip(&sol.phases).zip(&sol.controls) {
        nodes.push_str(&sig9(*t));
        for th in row {
            nodes.push(',');
            nodes.push_str(&sig9(*th));
        }
        nodes.push_str(&format!(",{}\n", sig9(*u)));
    }
    art.extra.push(("nodes.csv".into(), nodes));
    art.extra.push(("trace.csv".into(), sol.nlp.trace_csv()));
    art.summary = json!({
        "converged": sol.nlp.converged,
        "constraint_violation": sol.nlp.constraint_violation,
        "energy": sol.energy,
        "max_terminal_error": report.max_terminal_error(),
        "target_times": sol.target_times,
    });
    if !sol.nlp.converged {
        art.infeasible = Some(format!(
            "the collocation NLP did not converge (violation {}, optimality {}); try a larger ensemble.order, a looser ensemble.bound or multistart",
            sig9(sol.nlp.constraint_violation),
            sig9(sol.nlp.optimality)
        ));
    }
    art.plots.push(("control.svg".into(), control_plot("ensemble control", &[("u", &sol.trajectory)])));
    art.plots.push(("phase.svg".into(), phase_plot("phases", &[&sol.trajectory])));
    art.plots.push(("raster.svg".into(), raster(&report.spikes)));
    art.runs.push((report, sol.trajectory));
    Ok(())
}

fn control_plot(title: &str, runs: &[(&str, &Trajectory)]) -> Plot {
    let mut p = Plot::new(title, "t", "u");
    for (label, t) in runs {
        p.series.push(Series {
            label: label.to_string(),
            points: t.times.iter().copied().zip(t.controls.iter().copied()).collect(),
        });
    }
    p
}

fn phase_plot(title: &str, runs: &[&Trajectory]) -> Plot {
    let mut p = Plot::new(title, "t", "θ (rad)");
    for (r, t) in runs.iter().enumerate() {
        for k in 0..t.neurons() {
            let label = if runs.len() > 1 { format!("run {r}, θ{}", k + 1) } else { format!("θ{}", k + 1) };
            p.series.push(Series {
                label,
                points: t.times.iter().copied().zip(t.phase(k)).collect(),
            });
        }
    }
    p
}

fn raster(spikes: &[Vec<f64>]) -> Plot {
    let mut p = Plot::new("spike raster", "t", "neuron");
    for (k, s) in spikes.iter().enumerate() {
        p.marks.extend(s.iter().map(|&t| (t, k + 1)));
    }
    p.y_range = Some((0.0, spikes.len() as f64 + 1.0));
    p
}

/// `(θ₁, θ₂)` path over cells shaded by the sign of `k₁` (grey where switches go `X → Y`).
fn phase_plane(pair: &ThetaPair, traj: &Trajectory, target: [f64; 2]) -> Plot {
    let mut p = Plot::new("phase plane, shaded where k1 > 0", "θ1", "θ2");
    let cells = 60;
    let (xmax, ymax) = (target[0].max(2.0 * PI), target[1].max(2.0 * PI));
    for i in 0..cells {
        for j in 0..cells {
            let x = (i as f64 + 0.5) * xmax / cells as f64;
            let y = (j as f64 + 0.5) * ymax / cells as f64;
            let k1 = pair.classify([x, y]).k1;
            if k1 > 0.0 {
                p.rects.push(Rect {
                    x: (i as f64 * xmax / cells as f64, (i + 1) as f64 * xmax / cells as f64),
                    y: (j as f64 * ymax / cells as f64, (j + 1) as f64 * ymax / cells as f64),
                    fill: "#dddddd",
                });
            }
        }
    }
    p.series.push(Series {
        label: "trajectory".into(),
        points: traj.states.iter().map(|s| (s[0], s[1])).collect(),
    });
    p.x_range = Some((0.0, xmax));
    p.y_range = Some((0.0, ymax));
    p
}
