//! Scenario files: TOML, versioned, unknown keys rejected.

use std::path::{Path, PathBuf};

use phasesync::{ControlSpec, ModelKind, PhaseModel};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Controllability,
    SpikeSingle,
    TimeOptimalSingle,
    SpikeTwoTimeopt,
    SpikeEnsemble,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Controllability => "controllability",
            Command::SpikeSingle => "spike-single",
            Command::TimeOptimalSingle => "time-optimal-single",
            Command::SpikeTwoTimeopt => "spike-two-timeopt",
            Command::SpikeEnsemble => "spike-ensemble",
        }
    }

    fn table(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Controllability => "controllability",
            Command::SpikeSingle => "spike_single",
            Command::TimeOptimalSingle => "time_optimal_single",
            Command::SpikeTwoTimeopt => "spike_two",
            Command::SpikeEnsemble => "ensemble",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub models: Option<ModelSpec>,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub controllability: Option<ControllabilitySpec>,
    #[serde(default)]
    pub spike_single: Option<SpikeSingleSpec>,
    #[serde(default)]
    pub time_optimal_single: Option<TimeOptimalSingleSpec>,
    #[serde(default)]
    pub spike_two: Option<SpikeTwoSpec>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    /// Directory of the scenario file; relative paths inside it resolve against this.
    #[serde(skip)]
    pub base: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Theta baseline currents `I`.
    #[serde(default)]
    pub currents: Option<Vec<f64>>,
    /// Angular frequencies; for Theta `I = ω²/4`.
    #[serde(default)]
    pub omegas: Option<Vec<f64>>,
    /// PRC amplitudes `z` for SNIPER/sinusoidal models; default `2/ω`.
    #[serde(default)]
    pub prc_scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    /// Required for inline controls; defaults to the report's horizon otherwise.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub steps: Option<usize>,
    /// Terminal targets for the error column; taken from the report when re-simulating one.
    #[serde(default)]
    pub target: Option<Vec<f64>>,
    pub control: ControlSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ControlSource {
    Report(ReportRef),
    Inline(ControlSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRef {
    pub from_report: PathBuf,
    #[serde(default)]
    pub run: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllabilitySpec {
    pub state: Vec<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeSingleSpec {
    pub horizons: Vec<f64>,
    /// Amplitude bound; omitted means unbounded.
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeOptimalSingleSpec {
    pub bound: f64,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikeTwoSpec {
    pub bound: f64,
    pub windings: [u32; 2],
    #[serde(default)]
    pub first_switch_grid: Option<usize>,
    #[serde(default)]
    pub max_switches: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub horizon: f64,
    /// Target spike counts `m_k`; the terminal target is `2π m_k`.
    #[serde(default)]
    pub windings: Option<Vec<u32>>,
    /// Terminal phases in radians, as an alternative to `windings`.
    #[serde(default)]
    pub targets: Option<Vec<f64>>,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub w_term: Option<f64>,
    #[serde(default)]
    pub w_energy: Option<f64>,
    #[serde(default)]
    pub multistart: Option<usize>,
}

/// Input problems, reported with the offending field.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, InputError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let mut s: Scenario = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        s.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    /// Checks the version, the command/table pairing and every numeric field before any
    /// computation starts.
    pub fn validate(&self, command: Command) -> Result<(), InputError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if let Some(c) = self.command {
            if c != command {
                return Err(bad(format!(
                    "command: scenario is for `{}` but `{}` was invoked",
                    c.name(),
                    command.name()
                )));
            }
        }
        let present = [
            ("simulate", self.simulate.is_some()),
            ("controllability", self.controllability.is_some()),
            ("spike_single", self.spike_single.is_some()),
            ("time_optimal_single", self.time_optimal_single.is_some()),
            ("spike_two", self.spike_two.is_some()),
            ("ensemble", self.ensemble.is_some()),
        ];
        for (table, there) in present {
            if there && table != command.table() {
                return Err(bad(format!("[{table}]: not used by `{}`", command.name())));
            }
        }
        if !present.iter().any(|(t, there)| *there && *t == command.table()) {
            return Err(bad(format!("[{}]: required by `{}`", command.table(), command.name())));
        }
        let from_report = matches!(
            self.simulate,
            Some(SimulateSpec {
                control: ControlSource::Report(_),
                ..
            })
        );
        if self.models.is_none() && !(command == Command::Simulate && from_report) {
            return Err(bad("[models]: required"));
        }
        if let Some(m) = &self.models {
            m.validate()?;
        }
        match command {
            Command::Simulate => {
                let s = self.simulate.as_ref().expect("checked above");
                match s.horizon {
                    Some(t) => positive("simulate.horizon", t)?,
                    None if !from_report => return Err(bad("simulate.horizon: required for an inline control")),
                    None => {}
                }
                if let Some(n) = s.steps {
                    at_least("simulate.steps", n, 1)?;
                }
                self.check_len("simulate.initial", s.initial.as_deref())?;
                self.check_len("simulate.target", s.target.as_deref())?;
            }
            Command::Controllability => {
                let c = self.controllability.as_ref().expect("checked above");
                self.check_len("controllability.state", Some(&c.state))?;
                finite_all("controllability.state", &c.state)?;
                if let Some(t) = c.tol {
                    positive("controllability.tol", t)?;
                }
            }
            Command::SpikeSingle => {
                let s = self.spike_single.as_ref().expect("checked above");
                if s.horizons.is_empty() {
                    return Err(bad("spike_single.horizons: at least one horizon"));
                }
                for &t in &s.horizons {
                    positive("spike_single.horizons", t)?;
                }
                if let Some(b) = s.bound {
                    non_negative("spike_single.bound", b)?;
                }
                if let Some(n) = s.steps {
                    at_least("spike_single.steps", n, 1)?;
                }
                self.single_theta("spike_single")?;
            }
            Command::TimeOptimalSingle => {
                let s = self.time_optimal_single.as_ref().expect("checked above");
                non_negative("time_optimal_single.bound", s.bound)?;
                if let Some(n) = s.steps {
                    at_least("time_optimal_single.steps", n, 1)?;
                }
                if self.neuron_count() != 1 {
                    return Err(bad("models: time-optimal-single takes exactly one model"));
                }
            }
            Command::SpikeTwoTimeopt => {
                let s = self.spike_two.as_ref().expect("checked above");
                non_negative("spike_two.bound", s.bound)?;
                if s.windings.contains(&0) {
                    return Err(bad("spike_two.windings: must be positive"));
                }
                if let Some(g) = s.first_switch_grid {
                    at_least("spike_two.first_switch_grid", g, 2)?;
                }
                let m = self.models.as_ref().expect("checked above");
                if m.kind != ModelKind::Theta || self.neuron_count() != 2 {
                    return Err(bad("models: spike-two-timeopt takes exactly two theta models"));
                }
            }
            Command::SpikeEnsemble => {
                let e = self.ensemble.as_ref().expect("checked above");
                positive("ensemble.horizon", e.horizon)?;
                match (&e.windings, &e.targets) {
                    (Some(w), None) => self.check_len("ensemble.windings", Some(&w.iter().map(|&v| v as f64).collect::<Vec<_>>()))?,
                    (None, Some(t)) => {
                        self.check_len("ensemble.targets", Some(t))?;
                        finite_all("ensemble.targets", t)?;
                    }
                    _ => return Err(bad("ensemble: give exactly one of `windings` or `targets`")),
                }
                if let Some(n) = e.order {
                    at_least("ensemble.order", n, 2)?;
                }
                if let Some(b) = e.bound {
                    positive("ensemble.bound", b)?;
                }
                if let Some(w) = e.w_term {
                    non_negative("ensemble.w_term", w)?;
                }
                if let Some(w) = e.w_energy {
                    non_negative("ensemble.w_energy", w)?;
                }
            }
        }
        Ok(())
    }

    fn neuron_count(&self) -> usize {
        self.models.as_ref().map_or(0, ModelSpec::len)
    }

    fn check_len(&self, field: &str, v: Option<&[f64]>) -> Result<(), InputError> {
        match (v, &self.models) {
            (Some(v), Some(m)) if v.len() != m.len() => Err(bad(format!(
                "{field}: expected {} entries (one per model), got {}",
                m.len(),
                v.len()
            ))),
            _ => Ok(()),
        }
    }

    fn single_theta(&self, table: &str) -> Result<(), InputError> {
        let m = self.models.as_ref().expect("checked above");
        if m.kind != ModelKind::Theta || m.len() != 1 {
            return Err(bad(format!("models: {table} takes exactly one theta model")));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

impl ModelSpec {
    pub fn len(&self) -> usize {
        self.currents.as_ref().or(self.omegas.as_ref()).map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), InputError> {
        match (&self.currents, &self.omegas) {
            (Some(c), None) => {
                if self.kind != ModelKind::Theta {
                    return Err(bad("models.currents: only theta models take baseline currents; use `omegas`"));
                }
                for &i in c {
                    positive("models.currents", i)?;
                }
            }
            (None, Some(w)) => {
                for &v in w {
                    positive("models.omegas", v)?;
                }
            }
            _ => return Err(bad("models: give exactly one of `currents` or `omegas`")),
        }
        if self.len() == 0 {
            return Err(bad("models: at least one model"));
        }
        if let Some(z) = &self.prc_scale {
            if self.kind == ModelKind::Theta {
                return Err(bad("models.prc_scale: theta models have a fixed PRC"));
            }
            if z.len() != self.len() {
                return Err(bad(format!("models.prc_scale: expected {} entries, got {}", self.len(), z.len())));
            }
            for &v in z {
                positive("models.prc_scale", v)?;
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Vec<PhaseModel>, InputError> {
        let err = |e: phasesync::Error| bad(format!("models: {e}"));
        if let Some(c) = &self.currents {
            return c.iter().map(|&i| PhaseModel::theta(i).map_err(err)).collect();
        }
        let w = self.omegas.as_ref().expect("validated");
        w.iter()
            .enumerate()
            .map(|(k, &om)| {
                let z = self.prc_scale.as_ref().map(|z| z[k]);
                PhaseModel::from_omega(self.kind, om, z).map_err(err)
            })
            .collect()
    }
}

fn positive(field: &str, v: f64) -> Result<(), InputError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{field}: must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), InputError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{field}: must be finite and >= 0, got {v}")))
    }
}

fn finite_all(field: &str, v: &[f64]) -> Result<(), InputError> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(bad(format!("{field}: must be finite, got {x}"))),
        None => Ok(()),
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<(), InputError> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(format!("{field}: must be >= {min}, got {v}")))
    }
}
